"""Degradation composition sampling and training-view construction.

A composition is an ordered chain of operators, at most one per group,
applied sequentially. Training draws continuous strengths uniformly
between the severity-1 and severity-5 ladder endpoints; two views of a
pair share the operator sequence but sample strengths independently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .operators import REGISTRY, apply_operator, check_image, get_operator, resize_image
from .seeding import rng_for, stable_seed


@dataclass(frozen=True)
class CompositionTemplate:
    """Operator sequence with strengths left unsampled."""

    op_ids: tuple


@dataclass(frozen=True)
class CompositionSpec:
    """Operator sequence with concrete strengths, in application order."""

    ops: tuple  # of (op_id, value)

    @property
    def op_ids(self):
        return tuple(op_id for op_id, _ in self.ops)

    def __len__(self):
        return len(self.ops)


def _groups_of(table: dict) -> dict:
    """Map group -> list of op_ids present in the severity table."""
    by_group = {}
    for op_id in sorted(table):
        by_group.setdefault(get_operator(op_id).group, []).append(op_id)
    return by_group


def sample_strength(op_id: str, table: dict, rng: np.random.Generator) -> float:
    """Uniform draw between the severity-1 and severity-5 ladder endpoints."""
    ladder = table[op_id]
    lo, hi = min(ladder[0], ladder[-1]), max(ladder[0], ladder[-1])
    op = REGISTRY[op_id]
    if op.integer_param:
        return int(rng.integers(int(round(lo)), int(round(hi)) + 1))
    return float(rng.uniform(lo, hi))


def sample_template(seed: int, max_ops: int, table: dict, group_pool=None) -> CompositionTemplate:
    """Sample an operator sequence: n ~ U{1..max_ops}, <=1 op per group, shuffled order."""
    by_group = _groups_of(table)
    groups = sorted(by_group) if group_pool is None else sorted(group_pool)
    for g in groups:
        if g not in by_group:
            raise ValidationError(f"group '{g}' has no operators in the severity table")
    if max_ops < 1:
        raise ValidationError(f"max_ops must be >= 1, got {max_ops}")
    if max_ops > len(groups):
        raise ValidationError(f"max_ops={max_ops} exceeds available groups ({len(groups)})")
    rng = rng_for("template", seed)
    n = int(rng.integers(1, max_ops + 1))
    chosen_groups = list(rng.choice(groups, size=n, replace=False))
    op_ids = [by_group[g][int(rng.integers(0, len(by_group[g])))] for g in chosen_groups]
    rng.shuffle(op_ids)
    return CompositionTemplate(tuple(op_ids))


def instantiate(template: CompositionTemplate, seed: int, table: dict) -> CompositionSpec:
    """Draw concrete strengths for a template."""
    rng = rng_for("params", seed)
    return CompositionSpec(tuple((op_id, sample_strength(op_id, table, rng)) for op_id in template.op_ids))


def sample_composition(seed: int, max_ops: int, table: dict, group_pool=None) -> CompositionSpec:
    """Sample a full composition (sequence plus strengths) from one seed."""
    template = sample_template(seed, max_ops, table, group_pool)
    return instantiate(template, seed, table)


def apply_composition(img: np.ndarray, comp: CompositionSpec, seed: int) -> np.ndarray:
    """Apply the operators in listed order; dimensions are preserved."""
    out = check_image(img)
    for idx, (op_id, value) in enumerate(comp.ops):
        out = apply_operator(out, op_id, value, stable_seed(seed, idx, op_id))
    return out


def center_crop_half(img: np.ndarray) -> np.ndarray:
    """Centered crop covering half the width and half the height."""
    img = check_image(img)
    h, w = img.shape[:2]
    if h < 2 or w < 2:
        raise ValidationError(f"image too small for half crop: {h}x{w}")
    ch, cw = h // 2, w // 2
    y0, x0 = (h - ch) // 2, (w - cw) // 2
    return img[y0 : y0 + ch, x0 : x0 + cw].copy()


def make_hard_negative(img_deg: np.ndarray, input_size: int) -> np.ndarray:
    """Center-crop to half the spatial extent and resize back.

    Reduces fidelity through resolution loss while keeping content.
    """
    return resize_image(center_crop_half(img_deg), input_size)


@dataclass(frozen=True)
class ViewPair:
    """Two degraded views sharing an operator sequence, plus provenance."""

    view_a: np.ndarray = field(repr=False)
    view_b: np.ndarray = field(repr=False)
    spec_a: CompositionSpec = None
    spec_b: CompositionSpec = None


def degrade_view(img: np.ndarray, template: CompositionTemplate, seed: int, table: dict, input_size: int) -> tuple:
    """Instantiate the template for one view, apply it, resize to input size."""
    spec = instantiate(template, seed, table)
    out = apply_composition(img, spec, stable_seed(seed, "apply"))
    return resize_image(out, input_size), spec


def generate_views(img: np.ndarray, template: CompositionTemplate, seed: int, table: dict, input_size: int) -> ViewPair:
    """Two views of one image: same operator sequence, independent strengths."""
    view_a, spec_a = degrade_view(img, template, stable_seed(seed, "view", 0), table, input_size)
    view_b, spec_b = degrade_view(img, template, stable_seed(seed, "view", 1), table, input_size)
    return ViewPair(view_a, view_b, spec_a, spec_b)
