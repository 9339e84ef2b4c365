"""degmon: degradation-aware self-awareness monitoring for visual perception."""

__version__ = "0.1.0"
