"""Dataset ingestion, manifests, and the synthetic desk-scale image set.

Images are decoded to RGB and mapped to [0, 1] by value/255; grayscale
inputs are replicated to 3 channels. Manifests are flat CSVs sorted by
relative path so reruns are byte-identical.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .errors import IOFailure, ValidationError
from .operators import from_uint8, to_uint8
from .seeding import rng_for, stable_seed

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}

MANIFEST_HEADER = ["image_id", "relpath", "split", "dataset_tag"]


@dataclass(frozen=True)
class ManifestRow:
    image_id: str
    relpath: str
    split: str  # train | val
    dataset_tag: str


@dataclass
class DatasetManifest:
    root: Path
    rows: list
    warnings: list

    def split(self, name: str) -> list:
        return [r for r in self.rows if r.split == name]

    def path_of(self, row: ManifestRow) -> Path:
        return self.root / row.relpath


def load_image(path) -> np.ndarray:
    """Decode to float32 HxWx3 in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"image not found: {path}")
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except Exception as exc:  # PIL raises a zoo of decode errors
        raise IOFailure(f"cannot decode image {path}: {exc}") from exc
    return from_uint8(arr)


def save_image(img: np.ndarray, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def ingest(root_dir, val_fraction: float = 0.2, dataset_tag: str = "default") -> DatasetManifest:
    """Scan a directory of PNG/JPEG images into a deterministic manifest.

    The train/val split is a stable hash of the image id, so it does not
    depend on scan order or the number of files. Undecodable files are
    skipped and reported as warnings.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise ValidationError(f"dataset root is not a directory: {root}")
    paths = sorted(p for p in root.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ValidationError(f"no images found under {root}")
    rows, warnings = [], []
    for p in paths:
        relpath = p.relative_to(root).as_posix()
        image_id = relpath.rsplit(".", 1)[0].replace("/", "__")
        try:
            with Image.open(p) as im:
                im.load()
        except Exception as exc:
            msg = f"skipping undecodable file {relpath}: {exc}"
            warnings.append(msg)
            log.warning(msg)
            continue
        frac = (stable_seed("split", image_id) % 10_000) / 10_000.0
        split = "val" if frac < val_fraction else "train"
        rows.append(ManifestRow(image_id, relpath, split, dataset_tag))
    if not rows:
        raise ValidationError(f"no decodable images under {root}")
    return DatasetManifest(root, rows, warnings)


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in manifest.rows:
            writer.writerow([r.image_id, r.relpath, r.split, r.dataset_tag])


def read_manifest(path, root=None) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"manifest not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise IOFailure(f"bad manifest header in {path}: {reader.fieldnames}")
        for rec in reader:
            rows.append(ManifestRow(rec["image_id"], rec["relpath"], rec["split"], rec["dataset_tag"]))
    ids = [r.image_id for r in rows]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate image_ids in manifest {path}")
    return DatasetManifest(Path(root) if root else path.parent, rows, [])


# --- synthetic scenes ---------------------------------------------------------


def _synthetic_scene(size: int, rng: np.random.Generator) -> np.ndarray:
    """One procedural RGB scene: textured gradient background plus shapes.

    Content varies across seeds (colors, texture scale, shape layout) so
    the set carries both smooth regions and edges/texture, which keeps
    noise, blur, and compression artifacts all observable.
    """
    from scipy.ndimage import gaussian_filter

    yy, xx = np.meshgrid(np.linspace(0, 1, size), np.linspace(0, 1, size), indexing="ij")
    theta = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(theta) * xx + np.sin(theta) * yy
    base = rng.uniform(0.15, 0.7, size=3)
    tilt = rng.uniform(-0.35, 0.35, size=3)
    img = base[None, None, :] + ramp[..., None] * tilt[None, None, :]

    texture = gaussian_filter(rng.standard_normal((size, size)), sigma=rng.uniform(1.0, 4.0))
    texture /= max(texture.std(), 1e-8)
    img += texture[..., None] * rng.uniform(0.02, 0.10) * rng.uniform(0.5, 1.5, size=3)

    canvas = Image.fromarray(to_uint8(img))
    draw = ImageDraw.Draw(canvas)
    for _ in range(int(rng.integers(2, 7))):
        color = tuple(int(c) for c in rng.integers(0, 256, size=3))
        x0, y0 = rng.integers(0, size - 8, size=2)
        w, h = rng.integers(size // 10, size // 2, size=2)
        kind = rng.integers(0, 3)
        box = [int(x0), int(y0), int(min(x0 + w, size - 1)), int(min(y0 + h, size - 1))]
        if kind == 0:
            draw.rectangle(box, fill=color)
        elif kind == 1:
            draw.ellipse(box, fill=color)
        else:
            draw.line(box, fill=color, width=int(rng.integers(1, max(2, size // 24))))
    return from_uint8(np.asarray(canvas))


def synthesize_images(out_dir, count: int, size: int, seed: int) -> list:
    """Materialize a deterministic synthetic dataset; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        img = _synthetic_scene(size, rng_for("scene", seed, i))
        p = out / f"scene_{i:05d}.png"
        save_image(img, p)
        paths.append(p)
    return paths


def probe_images(count: int = 16, size: int = 64, seed: int = 7) -> list:
    """Fixed in-memory probe set used by severity-monotonicity checks."""
    return [_synthetic_scene(size, rng_for("probe", seed, i)) for i in range(count)]
