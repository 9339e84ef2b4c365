"""Severity benchmark construction.

Corruptions are assigned round-robin over sorted image ids so each image
keeps the same corruption at every severity level. Degraded images are
materialized to disk under deterministic names together with a manifest
CSV (`image_id,corruption_id,severity,relpath,seed`).
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .dataset import load_image, save_image
from .errors import IOFailure, ValidationError
from .operators import apply_operator
from .seeding import stable_seed

BENCH_HEADER = ["image_id", "corruption_id", "severity", "relpath", "seed"]
LEVELS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class Corruption:
    """A named evaluation corruption: one operator with its own 5-level ladder."""

    corruption_id: str
    op_id: str
    ladder: tuple  # 5 parameter values, severity 1..5

    def param(self, severity: int):
        if severity not in LEVELS:
            raise ValidationError(f"severity must be in 1..5, got {severity}")
        return self.ladder[severity - 1]


@dataclass(frozen=True)
class BenchmarkEntry:
    image_id: str
    corruption_id: str
    severity: int
    relpath: str
    seed: int


@dataclass
class SeverityBenchmark:
    root: Path
    entries: list
    corruption_ids: list
    config_hash: str

    def at_severity(self, severity: int) -> list:
        return [e for e in self.entries if e.severity == severity]

    def for_corruption(self, corruption_id: str, severity: int) -> list:
        return [e for e in self.entries if e.corruption_id == corruption_id and e.severity == severity]


def assign_round_robin(image_ids, corruption_ids) -> dict:
    """image i (sorted order) -> corruption_set[i mod K]; fixed across severities."""
    if not corruption_ids:
        raise ValidationError("corruption set is empty")
    if not image_ids:
        raise ValidationError("image manifest is empty")
    k = len(corruption_ids)
    return {img_id: corruption_ids[i % k] for i, img_id in enumerate(sorted(image_ids))}


def build_severity_benchmark(
    images: dict,
    corruptions: list,
    out_dir,
    seed: int,
    config_hash: str = "",
    levels=LEVELS,
) -> SeverityBenchmark:
    """Materialize the benchmark.

    `images` maps image_id -> source path (or an already-decoded array).
    Each output file is written exactly once under a deterministic name,
    so parallel or repeated materialization converges to the same bytes.
    """
    by_id = {c.corruption_id: c for c in corruptions}
    assignment = assign_round_robin(list(images), list(by_id))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for image_id in sorted(images):
        corruption = by_id[assignment[image_id]]
        src = images[image_id]
        img = src if not isinstance(src, (str, Path)) else load_image(src)
        for severity in levels:
            entry_seed = stable_seed(seed, image_id, corruption.corruption_id, severity)
            relpath = f"s{severity}/{image_id}__{corruption.corruption_id}__s{severity}.png"
            degraded = apply_operator(img, corruption.op_id, corruption.param(severity), entry_seed)
            save_image(degraded, out / relpath)
            entries.append(BenchmarkEntry(image_id, corruption.corruption_id, severity, relpath, entry_seed))
    bench = SeverityBenchmark(out, entries, sorted(by_id), config_hash)
    write_benchmark_manifest(bench, out / "benchmark.csv")
    (out / "benchmark_meta.json").write_text(
        json.dumps({"config_hash": config_hash, "seed": seed, "corruptions": sorted(by_id)}, sort_keys=True)
    )
    return bench


def write_benchmark_manifest(bench: SeverityBenchmark, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_HEADER)
        for e in bench.entries:
            writer.writerow([e.image_id, e.corruption_id, e.severity, e.relpath, e.seed])


def read_benchmark(root) -> SeverityBenchmark:
    root = Path(root)
    manifest = root / "benchmark.csv"
    if not manifest.exists():
        raise IOFailure(f"benchmark manifest not found: {manifest}")
    entries = []
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != BENCH_HEADER:
            raise IOFailure(f"bad benchmark header: {reader.fieldnames}")
        for rec in reader:
            entries.append(
                BenchmarkEntry(rec["image_id"], rec["corruption_id"], int(rec["severity"]), rec["relpath"], int(rec["seed"]))
            )
    meta_path = root / "benchmark_meta.json"
    config_hash = ""
    corruption_ids = sorted({e.corruption_id for e in entries})
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        config_hash = meta.get("config_hash", "")
        corruption_ids = meta.get("corruptions", corruption_ids)
    missing = [e.relpath for e in entries if not (root / e.relpath).exists()]
    if missing:
        raise IOFailure("missing degraded files: " + ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else ""))
    return SeverityBenchmark(root, entries, corruption_ids, config_hash)
