"""Run configuration: TOML loading, merging, validation, hashing.

A run config is the package default (configs/default.toml) with the
user's TOML merged on top. The canonical hash of the merged dict is
embedded in every artifact (checkpoints, benchmarks, reports), and
`evaluate` refuses to mix artifacts with different hashes.
"""

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli

from .benchmark import Corruption
from .errors import ConfigError
from .operators import REGISTRY

_LADDER_LEN = 5


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_default_config() -> dict:
    text = resources.files("degmon.configs").joinpath("default.toml").read_text()
    return tomli.loads(text)


def load_config(path=None, overrides: dict = None) -> "RunConfig":
    merged = load_default_config()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            user = tomli.loads(p.read_text())
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {p}: {exc}") from exc
        merged = _deep_merge(merged, user)
    if overrides:
        merged = _deep_merge(merged, overrides)
    return RunConfig.from_dict(merged)


def canonical_hash(raw: dict) -> str:
    """Hash of the canonical JSON form of the merged config."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _validate_ladder(op_id: str, ladder) -> tuple:
    if op_id not in REGISTRY:
        raise ConfigError(f"severity table references unknown operator '{op_id}'")
    if len(ladder) != _LADDER_LEN:
        raise ConfigError(f"severity table for '{op_id}' must have {_LADDER_LEN} entries, got {len(ladder)}")
    op = REGISTRY[op_id]
    lo, hi = op.domain
    for v in ladder:
        if not (lo <= v <= hi):
            raise ConfigError(f"severity entry {v} for '{op_id}' outside domain [{lo}, {hi}]")
    return tuple(ladder)


@dataclass(frozen=True)
class RunConfig:
    raw: dict = field(repr=False)
    config_hash: str

    master_seed: int
    input_resolution: int
    output_dir: Path

    train_root: str
    val_root: str
    val_fraction: float
    dataset_tag: str

    max_ops: int
    hard_negative_order: str
    pair_mode: str
    severity_tables: dict

    eval_corruptions: list  # of Corruption
    corruption_families: dict  # corruption_id -> family

    widths: tuple
    tap_stages: tuple
    reduced_dim: int
    embed_dim: int
    temperature: float
    pool: str
    last_layer_only: bool
    use_hard_negatives: bool
    freeze_backbone: bool

    epochs: int
    batch_pairs: int
    learning_rate: float
    prototype_momentum: float
    warmup_epoch: int

    flow: dict
    tau: float

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            deg = raw["degradations"]
            tables = {op: _validate_ladder(op, ladder) for op, ladder in deg["severity_tables"].items()}
            corruptions, families = [], {}
            for cid, spec in raw.get("eval_corruptions", {}).items():
                ladder = _validate_ladder(spec["op"], spec["severity"])
                corruptions.append(Corruption(cid, spec["op"], ladder))
                families[cid] = spec.get("family", "other")
            model = raw["model"]
            train = raw["train"]
            epochs = int(train["epochs"])
            warmup = int(train["warmup_epoch"])
            if warmup < 0:
                warmup = epochs // 2
            hn_order = deg["hard_negative_order"]
            if hn_order not in ("degrade_then_crop", "crop_then_degrade"):
                raise ConfigError(f"unknown hard_negative_order '{hn_order}'")
            pair_mode = deg["pair_mode"]
            if pair_mode not in ("distinct", "same_image"):
                raise ConfigError(f"unknown pair_mode '{pair_mode}'")
            pool = model["pool"]
            if pool not in ("attention", "gap"):
                raise ConfigError(f"unknown pool mode '{pool}'")
            if float(model["temperature"]) <= 0:
                raise ConfigError("temperature must be positive")
            if not (0.0 <= float(train["prototype_momentum"]) < 1.0):
                raise ConfigError("prototype_momentum must be in [0, 1)")
            return cls(
                raw=raw,
                config_hash=canonical_hash(raw),
                master_seed=int(raw["master_seed"]),
                input_resolution=int(raw["input_resolution"]),
                output_dir=Path(raw["output_dir"]),
                train_root=raw["data"]["train_root"],
                val_root=raw["data"]["val_root"],
                val_fraction=float(raw["data"]["val_fraction"]),
                dataset_tag=raw["data"]["dataset_tag"],
                max_ops=int(deg["max_ops"]),
                hard_negative_order=hn_order,
                pair_mode=pair_mode,
                severity_tables=tables,
                eval_corruptions=sorted(corruptions, key=lambda c: c.corruption_id),
                corruption_families=families,
                widths=tuple(model["widths"]),
                tap_stages=tuple(model["tap_stages"]),
                reduced_dim=int(model["reduced_dim"]),
                embed_dim=int(model["embed_dim"]),
                temperature=float(model["temperature"]),
                pool=pool,
                last_layer_only=bool(model["last_layer_only"]),
                use_hard_negatives=bool(model["use_hard_negatives"]),
                freeze_backbone=bool(model["freeze_backbone"]),
                epochs=epochs,
                batch_pairs=int(train["batch_pairs"]),
                learning_rate=float(train["learning_rate"]),
                prototype_momentum=float(train["prototype_momentum"]),
                warmup_epoch=warmup,
                flow=dict(raw["flow"]),
                tau=float(raw["monitor"]["tau"]),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc

    def require_paths(self, *names) -> None:
        """Validate that the named dataset roots exist."""
        for name in names:
            value = getattr(self, name)
            if not value or not Path(value).exists():
                raise ConfigError(f"config path '{name}' does not exist: {value!r}")
