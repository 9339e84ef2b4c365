"""Pristine prototype and the degradation score.

The prototype is the EMA of clean-image embedding means, started only
after a warm-up phase. It is renormalized after every update so the
cosine-distance and dot-product forms of the score stay identical; the
update itself never participates in gradient computation (callers feed
detached embeddings).
"""

import numpy as np

from .errors import StateError, ValidationError


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise ValidationError("cannot normalize a (near) zero prototype")
    return v / norm


class PristinePrototype:
    """EMA-maintained unit vector anchoring nominal imaging conditions."""

    def __init__(self, momentum: float = 0.99, warmup_epoch: int = 0):
        if not (0.0 <= momentum < 1.0):
            raise ValidationError(f"momentum must be in [0, 1), got {momentum}")
        self.momentum = momentum
        self.warmup_epoch = warmup_epoch
        self.mu = None

    @property
    def initialized(self) -> bool:
        return self.mu is not None

    def _batch_mean(self, embeddings) -> np.ndarray:
        arr = np.asarray(embeddings, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValidationError("prototype update needs a non-empty batch of embeddings")
        return arr.mean(axis=0)

    def maybe_init(self, epoch: int, embeddings) -> None:
        """No-op before the warm-up epoch; first eligible call initializes,
        later calls route to update."""
        if epoch < self.warmup_epoch:
            return
        if self.initialized:
            self.update(embeddings)
            return
        self.mu = _normalize(self._batch_mean(embeddings))

    def update(self, embeddings) -> None:
        if not self.initialized:
            raise StateError("prototype update called before initialization")
        mean = self._batch_mean(embeddings)
        self.mu = _normalize(self.momentum * self.mu + (1.0 - self.momentum) * mean)


def degradation_score(z, proto: PristinePrototype) -> float:
    """Cosine distance to the prototype; larger = more degraded, range [0, 2]."""
    if not proto.initialized:
        raise StateError("prototype not initialized; cannot score")
    z = np.asarray(z, dtype=np.float64)
    return float(1.0 - z @ proto.mu)


def gate(score: float, tau: float) -> bool:
    """Accept decision: true iff the score is within the tolerated regime
    (boundary inclusive)."""
    return score <= tau
