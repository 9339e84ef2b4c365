import numpy as np
import pytest
import torch

from degmon.errors import NumericalError, StateError, ValidationError
from degmon.flow import LOG_2PI, FlowModel, MultiScaleFlow, nll_score, pool_features, train_flow


def test_pool_constant_map():
    fm = [np.full((3, 4, 4), 0.7, dtype=np.float32)]
    assert np.allclose(pool_features(fm), [0.7, 0.7, 0.7])


def test_pool_selection_dims():
    fm = [np.zeros((16, 8, 8)), np.zeros((32, 4, 4))]
    assert pool_features(fm, [0, 1]).shape == (48,)
    assert pool_features(fm, [1]).shape == (32,)


def test_pool_matches_mean_loop(rng):
    fm = [rng.standard_normal((5, 3, 4))]
    got = pool_features(fm)
    want = np.array([fm[0][c].sum() / 12.0 for c in range(5)])
    assert np.allclose(got, want, atol=1e-6)


def test_pool_empty_selection_rejected():
    with pytest.raises(ValidationError):
        pool_features([np.zeros((3, 2, 2))], [])
    with pytest.raises(ValidationError):
        pool_features([np.zeros((3, 2, 2))], [2])


def test_identity_at_init(rng):
    torch.manual_seed(0)
    flow = FlowModel(dim=6)
    x = torch.tensor(rng.standard_normal((10, 6)))
    z, log_det = flow(x)
    assert torch.allclose(z, x)
    assert torch.all(log_det == 0)


def test_nll_of_identity_flow_at_origin():
    flow = FlowModel(dim=5)
    flow.fitted = True
    got = nll_score(flow, np.zeros(5))
    assert abs(float(got[0]) - 0.5 * 5 * LOG_2PI) < 1e-12


def test_identity_flow_nll_grows_with_radius():
    flow = FlowModel(dim=4)
    flow.fitted = True
    small = float(nll_score(flow, np.full(4, 0.1))[0])
    large = float(nll_score(flow, np.full(4, 2.0))[0])
    assert large > small


def trained_toy_flow(seed=0, dim=2, epochs=80):
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, 2, size=400)
    data = np.where(comp[:, None] == 0, rng.normal(-1.5, 0.4, (400, dim)), rng.normal(1.5, 0.6, (400, dim)))
    flow, log = train_flow(data, seed=seed, hidden=32, epochs=epochs, batch_size=64)
    return flow, log, data


def test_round_trip_inversion(rng):
    flow, _, _ = trained_toy_flow(dim=4, epochs=20)
    x = torch.tensor(rng.standard_normal((1000, 4)))
    with torch.no_grad():
        z, _ = flow(x)
        back = flow.inverse(z)
    assert float(torch.max(torch.abs(back - x))) < 1e-5


def test_log_det_matches_numeric_jacobian(rng):
    for dim in (2, 4, 6):
        flow, _, _ = trained_toy_flow(seed=dim, dim=dim, epochs=15)
        x = torch.tensor(rng.standard_normal((1, dim)))
        with torch.no_grad():
            _, log_det = flow(x)
        eps = 1e-6
        jac = np.zeros((dim, dim))
        with torch.no_grad():
            for j in range(dim):
                up, down = x.clone(), x.clone()
                up[0, j] += eps
                down[0, j] -= eps
                jac[:, j] = ((flow(up)[0] - flow(down)[0]) / (2 * eps))[0].numpy()
        _, num_logdet = np.linalg.slogdet(jac)
        assert abs(float(log_det[0]) - num_logdet) < 1e-4, f"dim {dim}"


def test_trained_nll_matches_density_formula(rng):
    flow, _, _ = trained_toy_flow(epochs=30)
    x = rng.standard_normal((5, 2))
    xt = torch.tensor(x)
    with torch.no_grad():
        z, log_det = flow(flow.standardize(xt))
    want = -(
        -0.5 * (z.numpy() ** 2).sum(axis=1) - 0.5 * 2 * LOG_2PI + log_det.numpy()
    )
    got = nll_score(flow, x)
    assert np.allclose(got, want, atol=1e-6)


def test_training_reduces_nll():
    for seed in (0, 1, 2):
        _, log, _ = trained_toy_flow(seed=seed, epochs=200)
        assert log[0]["nll"] - log[-1]["nll"] >= 0.5, f"seed {seed}: {log[0]['nll']} -> {log[-1]['nll']}"


def test_density_integrates_to_one():
    flow, _, _ = trained_toy_flow(epochs=200)
    # integrate exp(-nll) over standardized coordinates
    grid = np.linspace(-8.0, 8.0, 321)
    cell = (grid[1] - grid[0]) ** 2
    xs, ys = np.meshgrid(grid, grid, indexing="ij")
    pts_std = np.stack([xs.ravel(), ys.ravel()], axis=1)
    pts_raw = pts_std * flow.input_std.numpy() + flow.input_mean.numpy()
    total = float(np.exp(-nll_score(flow, pts_raw)).sum() * cell)
    assert abs(total - 1.0) < 0.02, total


def test_zero_learning_rate_keeps_parameters(rng):
    data = rng.standard_normal((64, 3))
    torch.manual_seed(0)
    flow, _ = train_flow(data, seed=5, epochs=3, learning_rate=0.0)
    flow2, _ = train_flow(data, seed=5, epochs=0)
    for p1, p2 in zip(flow.parameters(), flow2.parameters()):
        assert torch.equal(p1, p2)


def test_training_determinism(rng):
    data = rng.standard_normal((100, 4))
    f1, log1 = train_flow(data, seed=9, epochs=5)
    f2, log2 = train_flow(data, seed=9, epochs=5)
    assert [r["nll"] for r in log1] == [r["nll"] for r in log2]
    for p1, p2 in zip(f1.parameters(), f2.parameters()):
        assert torch.equal(p1, p2)


def test_constant_coordinate_rejected(rng):
    data = rng.standard_normal((50, 3))
    data[:, 1] = 4.2
    with pytest.raises(NumericalError, match="1"):
        train_flow(data, seed=0, epochs=1)


def test_untrained_flow_refuses_to_score():
    flow = FlowModel(dim=3)
    with pytest.raises(StateError):
        nll_score(flow, np.zeros(3))


def test_non_finite_input_rejected():
    flow = FlowModel(dim=3)
    flow.fitted = True
    with pytest.raises(ValidationError):
        nll_score(flow, np.array([np.nan, 0.0, 1.0]))


def test_too_few_samples_rejected():
    with pytest.raises(ValidationError):
        train_flow(np.zeros((1, 4)), seed=0)


class TestMultiScale:
    def fitted(self, rng):
        feats = {0: rng.standard_normal((80, 3)), 1: rng.standard_normal((80, 5))}
        return MultiScaleFlow.fit(feats, seed=2, epochs=10, hidden=16), feats

    def test_single_layer_equals_standardized_nll(self, rng):
        feats = {1: rng.standard_normal((60, 4))}
        ms = MultiScaleFlow.fit(feats, seed=3, epochs=10, hidden=16)
        x = {1: rng.standard_normal((7, 4))}
        mean, std = ms.calibration[1]
        want = (nll_score(ms.flows[1], x[1]) - mean) / std
        assert np.allclose(ms.score(x), want)

    def test_declared_aggregation_is_sum(self, rng):
        ms, _ = self.fitted(rng)
        x = {0: rng.standard_normal((4, 3)), 1: rng.standard_normal((4, 5))}
        parts = []
        for layer in (0, 1):
            mean, std = ms.calibration[layer]
            parts.append((nll_score(ms.flows[layer], x[layer]) - mean) / std)
        assert np.allclose(ms.score(x), parts[0] + parts[1])

    def test_missing_layer_rejected(self, rng):
        ms, _ = self.fitted(rng)
        with pytest.raises(ValidationError):
            ms.score({0: rng.standard_normal((2, 3))})
