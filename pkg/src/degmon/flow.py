"""Likelihood baseline: masked affine coupling flow over pooled features.

Four coupling blocks with alternating half masks map a standardized
feature vector to a standard-normal latent; the monitoring score is the
negative log-likelihood, oriented so larger means more degraded. Scale
outputs are squashed by scale_bound * tanh for stability. Everything
runs in float64: the models are tiny and the invertibility and
log-determinant contracts are tight.
"""

import time

import numpy as np
import torch
from torch import nn

from .errors import NumericalError, StateError, ValidationError
from .seeding import rng_for, stable_seed

LOG_2PI = float(np.log(2.0 * np.pi))
N_BLOCKS = 4


def pool_features(feature_maps, layer_selection=None) -> np.ndarray:
    """Global average pool each selected tap and concatenate.

    `feature_maps` is a list of CxHxW arrays (a FeatureMapSet's maps).
    """
    n = len(feature_maps)
    selection = list(range(n)) if layer_selection is None else list(layer_selection)
    if not selection:
        raise ValidationError("layer selection is empty")
    for idx in selection:
        if idx < 0 or idx >= n:
            raise ValidationError(f"layer index {idx} out of range for {n} taps")
    pooled = [np.asarray(feature_maps[idx], dtype=np.float64).mean(axis=(1, 2)) for idx in selection]
    return np.concatenate(pooled)


def _half_mask(dim: int, parity: int) -> torch.Tensor:
    mask = torch.zeros(dim, dtype=torch.float64)
    half = (dim + 1) // 2
    if parity == 0:
        mask[:half] = 1.0
    else:
        mask[half:] = 1.0
    return mask


class CouplingBlock(nn.Module):
    """Affine update of the masked-out coordinates, conditioned on the rest."""

    def __init__(self, dim: int, hidden: int, mask: torch.Tensor, scale_bound: float = 3.0):
        super().__init__()
        self.register_buffer("mask", mask.to(torch.float64))
        comp = 1.0 - self.mask
        if float(self.mask.sum()) == 0 or float(comp.sum()) == 0:
            raise ValidationError("coupling mask must split the coordinates")
        self.scale_bound = scale_bound
        self.scale_net = self._net(dim, hidden)
        self.shift_net = self._net(dim, hidden)

    @staticmethod
    def _net(dim, hidden):
        net = nn.Sequential(nn.Linear(dim, hidden), nn.SiLU(), nn.Linear(hidden, dim))
        # zero-init the last layer: the block starts as the identity
        nn.init.zeros_(net[-1].weight)
        nn.init.zeros_(net[-1].bias)
        return net.double()

    def _s_t(self, masked_in):
        s = self.scale_bound * torch.tanh(self.scale_net(masked_in)) * (1.0 - self.mask)
        t = self.shift_net(masked_in) * (1.0 - self.mask)
        return s, t

    def forward(self, x):
        masked_in = x * self.mask
        s, t = self._s_t(masked_in)
        y = masked_in + (1.0 - self.mask) * (x * torch.exp(s) + t)
        return y, s.sum(dim=-1)

    def inverse(self, y):
        masked_in = y * self.mask
        s, t = self._s_t(masked_in)
        return masked_in + (1.0 - self.mask) * ((y - t) * torch.exp(-s))


class FlowModel(nn.Module):
    """Four alternating coupling blocks plus frozen input standardization."""

    def __init__(self, dim: int, hidden: int = 64, scale_bound: float = 3.0):
        super().__init__()
        if dim < 2:
            raise ValidationError(f"flow needs dim >= 2, got {dim}")
        self.dim = dim
        self.blocks = nn.ModuleList(
            [CouplingBlock(dim, hidden, _half_mask(dim, i % 2), scale_bound) for i in range(N_BLOCKS)]
        )
        self.register_buffer("input_mean", torch.zeros(dim, dtype=torch.float64))
        self.register_buffer("input_std", torch.ones(dim, dtype=torch.float64))
        self.fitted = False

    def set_standardization(self, features: np.ndarray) -> None:
        features = np.asarray(features, dtype=np.float64)
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        dead = np.nonzero(std < 1e-12)[0]
        if dead.size:
            raise NumericalError(f"constant feature coordinates {dead.tolist()}; cannot standardize")
        self.input_mean.copy_(torch.from_numpy(mean))
        self.input_std.copy_(torch.from_numpy(std))

    def standardize(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.input_mean) / self.input_std

    def forward(self, x_std: torch.Tensor):
        """Standardized input -> (latent, log|det J|)."""
        if not torch.isfinite(x_std).all():
            raise ValidationError("non-finite input to flow")
        z = x_std
        log_det = torch.zeros(x_std.shape[0], dtype=torch.float64)
        for block in self.blocks:
            z, ld = block(z)
            log_det = log_det + ld
        return z, log_det

    def inverse(self, z: torch.Tensor) -> torch.Tensor:
        x = z
        for block in reversed(self.blocks):
            x = block.inverse(x)
        return x

    def nll(self, x_raw: torch.Tensor) -> torch.Tensor:
        """Negative log-likelihood in standardized coordinates."""
        z, log_det = self.forward(self.standardize(x_raw))
        log_base = -0.5 * (z**2).sum(dim=-1) - 0.5 * self.dim * LOG_2PI
        return -(log_base + log_det)


def nll_score(flow: FlowModel, x: np.ndarray) -> np.ndarray:
    """Score raw feature vectors; larger = more degraded."""
    if not flow.fitted:
        raise StateError("flow has not been trained; cannot score")
    arr = torch.as_tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    with torch.no_grad():
        return flow.nll(arr).numpy()


def train_flow(features: np.ndarray, seed: int, hidden: int = 64, scale_bound: float = 3.0,
               epochs: int = 60, batch_size: int = 64, learning_rate: float = 1e-3) -> tuple:
    """Fit a flow to pristine feature vectors by maximum likelihood.

    Returns (flow, log) where log is a list of per-epoch records
    {"epoch", "nll", "wall_time"}.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise ValidationError(f"need >= 2 feature vectors, got shape {features.shape}")
    torch.manual_seed(stable_seed(seed, "flow-init"))
    flow = FlowModel(features.shape[1], hidden=hidden, scale_bound=scale_bound)
    flow.set_standardization(features)
    data = torch.from_numpy(features)
    optimizer = torch.optim.Adam(flow.parameters(), lr=learning_rate)
    log = []
    n = features.shape[0]
    for epoch in range(epochs):
        order = rng_for(seed, "flow-epoch", epoch).permutation(n)
        start = time.time()
        epoch_nll = 0.0
        for lo in range(0, n, batch_size):
            batch = data[order[lo : lo + batch_size]]
            loss = flow.nll(batch).mean()
            if not torch.isfinite(loss):
                raise NumericalError(f"flow training diverged at epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_nll += float(loss.detach()) * batch.shape[0]
        log.append({"epoch": epoch, "nll": epoch_nll / n, "wall_time": time.time() - start})
    flow.fitted = True
    return flow, log


class MultiScaleFlow:
    """One flow per selected tap; scores are z-scored per layer and summed."""

    def __init__(self, flows: dict, calibration: dict):
        if not flows:
            raise ValidationError("multi-scale flow needs at least one layer")
        if set(flows) != set(calibration):
            raise ValidationError("flows and calibration disagree on layers")
        self.flows = flows
        self.calibration = calibration  # layer -> (nll_mean, nll_std)

    @classmethod
    def fit(cls, features_per_layer: dict, seed: int, **kwargs) -> "MultiScaleFlow":
        flows, calibration = {}, {}
        for layer, feats in sorted(features_per_layer.items()):
            flow, _ = train_flow(feats, stable_seed(seed, "layer", layer), **kwargs)
            flows[layer] = flow
            nlls = nll_score(flow, feats)
            std = float(nlls.std())
            if std < 1e-12:
                raise NumericalError(f"layer {layer}: training NLLs are constant")
            calibration[layer] = (float(nlls.mean()), std)
        return cls(flows, calibration)

    def score(self, features_per_layer: dict) -> np.ndarray:
        missing = sorted(set(self.flows) - set(features_per_layer))
        if missing:
            raise ValidationError(f"missing features for layers {missing}")
        total = None
        for layer, flow in self.flows.items():
            mean, std = self.calibration[layer]
            z = (nll_score(flow, features_per_layer[layer]) - mean) / std
            total = z if total is None else total + z
        return total
