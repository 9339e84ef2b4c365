"""Embedding head and contrastive objective.

Per tap: 1x1 reduction, spatial attention pooling (softmax over per
position scalar scores). The pooled vectors are concatenated and
projected by a two-layer MLP, then l2-normalized. The loss is a
four-block normalized temperature-scaled cross entropy: two
full-resolution views form a positive pair, their half-crop counterparts
form a second positive pair, and every other embedding in the batch,
cross-scale ones included, is a negative for each anchor.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .errors import NumericalError, ValidationError


@dataclass(frozen=True)
class ProjectionConfig:
    reduced_dim: int = 32
    embed_dim: int = 64
    temperature: float = 0.1

    def __post_init__(self):
        if self.reduced_dim < 1 or self.embed_dim < 1:
            raise ValidationError("reduced_dim and embed_dim must be >= 1")
        if self.temperature <= 0:
            raise ValidationError("temperature must be positive")

    @property
    def mlp_hidden(self) -> int:
        return 2 * self.embed_dim


def fuse(vectors: list) -> torch.Tensor:
    """Concatenate per-tap pooled vectors (B x d each) in tap order."""
    if not vectors:
        raise ValidationError("fuse needs at least one vector")
    dims = {v.shape[-1] for v in vectors}
    if len(dims) != 1:
        raise ValidationError(f"pooled vectors disagree in dimension: {sorted(dims)}")
    return torch.cat(vectors, dim=-1)


def normalize_embedding(y: torch.Tensor) -> torch.Tensor:
    norms = torch.linalg.vector_norm(y, dim=-1, keepdim=True)
    if torch.any(norms < 1e-12):
        raise NumericalError("embedding collapsed to (near) zero before normalization")
    return y / norms


class EmbeddingHead(nn.Module):
    """Maps backbone tap maps to a unit-norm embedding.

    tap_selection restricts which taps are read (the last-layer-only
    ablation passes just the final index). The attention scorers are
    zero-initialized, so an untrained head pools exactly like global
    average pooling, which is also the behavior of pool="gap".
    """

    def __init__(self, tap_channels, config: ProjectionConfig, pool: str = "attention", tap_selection=None):
        super().__init__()
        if pool not in ("attention", "gap"):
            raise ValidationError(f"unknown pool mode '{pool}'")
        self.config = config
        self.pool = pool
        self.tap_selection = tuple(tap_selection) if tap_selection is not None else tuple(range(len(tap_channels)))
        if not self.tap_selection:
            raise ValidationError("tap selection is empty")
        for t in self.tap_selection:
            if t < 0 or t >= len(tap_channels):
                raise ValidationError(f"tap index {t} out of range")
        d = config.reduced_dim
        self.reducers = nn.ModuleList(
            [nn.Conv2d(tap_channels[t], d, kernel_size=1) for t in self.tap_selection]
        )
        self.scorers = nn.ModuleList([nn.Conv2d(d, 1, kernel_size=1) for _ in self.tap_selection])
        for scorer in self.scorers:
            nn.init.zeros_(scorer.weight)
            nn.init.zeros_(scorer.bias)
        fused = d * len(self.tap_selection)
        self.mlp = nn.Sequential(
            nn.Linear(fused, config.mlp_hidden),
            nn.SiLU(),
            nn.Linear(config.mlp_hidden, config.embed_dim),
        )

    def reduce_layer(self, feature_map: torch.Tensor, layer_index: int) -> torch.Tensor:
        """1x1 channel reduction; spatial size preserved."""
        return self.reducers[layer_index](feature_map)

    def attention_pool(self, reduced: torch.Tensor, layer_index: int) -> torch.Tensor:
        """Convex combination of per-position channel vectors.

        Weights are a softmax over per-position scalar scores; in gap
        mode (or with a zero scorer) they are uniform, i.e. global
        average pooling.
        """
        b, d, h, w = reduced.shape
        flat = reduced.reshape(b, d, h * w)
        if self.pool == "gap":
            return flat.mean(dim=-1)
        scores = self.scorers[layer_index](reduced).reshape(b, h * w)
        weights = torch.softmax(scores, dim=-1)
        return torch.einsum("bdp,bp->bd", flat, weights)

    def project(self, h: torch.Tensor) -> torch.Tensor:
        return normalize_embedding(self.mlp(h))

    def forward(self, taps: list) -> torch.Tensor:
        selected = [taps[t] for t in self.tap_selection]
        pooled = [self.attention_pool(self.reduce_layer(m, i), i) for i, m in enumerate(selected)]
        return self.project(fuse(pooled))


@dataclass
class ContrastiveBatch:
    """Four embedding blocks; the hard-negative blocks may be absent."""

    z_a: torch.Tensor
    z_b: torch.Tensor
    z_ha: torch.Tensor = None
    z_hb: torch.Tensor = None

    def __post_init__(self):
        blocks = [self.z_a, self.z_b] + ([self.z_ha, self.z_hb] if self.z_ha is not None else [])
        if self.z_ha is not None and self.z_hb is None or self.z_hb is not None and self.z_ha is None:
            raise ValidationError("hard-negative blocks must come in pairs")
        counts = {b.shape[0] for b in blocks}
        if len(counts) != 1:
            raise ValidationError(f"blocks disagree in count: {sorted(counts)}")
        if self.z_a.shape[0] < 2:
            raise ValidationError("contrastive batch needs at least 2 pairs")

    @property
    def has_hard_negatives(self) -> bool:
        return self.z_ha is not None


def nt_xent_loss(batch: ContrastiveBatch, temperature: float) -> torch.Tensor:
    """Mean NT-Xent over all anchors.

    With hard negatives the anchors are the 4B embeddings; each anchor's
    positive is its same-index counterpart in the partner block, and its
    denominator sums the similarity terms of every other embedding in
    the batch. Without hard negatives this reduces to the standard
    two-view formulation over 2B embeddings.
    """
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    n = batch.z_a.shape[0]
    if batch.has_hard_negatives:
        stacked = torch.cat([batch.z_a, batch.z_b, batch.z_ha, batch.z_hb], dim=0)
        idx = torch.arange(n)
        pos = torch.cat([idx + n, idx, idx + 3 * n, idx + 2 * n])
    else:
        stacked = torch.cat([batch.z_a, batch.z_b], dim=0)
        idx = torch.arange(n)
        pos = torch.cat([idx + n, idx])
    sim = stacked @ stacked.T / temperature
    total = stacked.shape[0]
    eye = torch.eye(total, dtype=torch.bool, device=sim.device)
    denom = torch.logsumexp(sim.masked_fill(eye, float("-inf")), dim=-1)
    pos_sim = sim[torch.arange(total), pos]
    loss = (denom - pos_sim).mean()
    if not torch.isfinite(loss):
        raise NumericalError("contrastive loss is not finite")
    return loss
