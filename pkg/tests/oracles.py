"""Independent brute-force oracles used by the test suite.

These deliberately avoid the library's vectorized code paths: explicit
Python loops, explicit term enumeration, explicit pair counting.
"""

import math

import numpy as np


def _gamma(a, b, temperature):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cos = float(a @ b) / (float(np.linalg.norm(a)) * float(np.linalg.norm(b)))
    return math.exp(cos / temperature)


def _term(anchor_block, i, positive_block, other_blocks, temperature):
    anchor = anchor_block[i]
    numerator = _gamma(anchor, positive_block[i], temperature)
    denominator = 0.0
    for block in [positive_block, *other_blocks]:
        for v in block:
            denominator += _gamma(anchor, v, temperature)
    for k, v in enumerate(anchor_block):
        if k != i:
            denominator += _gamma(anchor, v, temperature)
    return -math.log(numerator / denominator)


def nt_xent_oracle_full(z_a, z_b, z_ha, z_hb, temperature):
    """Four-term loss by literal enumeration of every similarity term."""
    n = len(z_a)
    total = 0.0
    for i in range(n):
        total += _term(z_a, i, z_b, [z_ha, z_hb], temperature)
        total += _term(z_b, i, z_a, [z_ha, z_hb], temperature)
        total += _term(z_ha, i, z_hb, [z_a, z_b], temperature)
        total += _term(z_hb, i, z_ha, [z_a, z_b], temperature)
    return total / (4.0 * n)


def nt_xent_oracle_two_view(z_a, z_b, temperature):
    """Standard two-view loss by literal enumeration."""
    n = len(z_a)
    total = 0.0
    for i in range(n):
        total += _term(z_a, i, z_b, [], temperature)
        total += _term(z_b, i, z_a, [], temperature)
    return total / (2.0 * n)


def auroc_pair_counting(id_scores, ood_scores):
    """O(n^2) wins + half-ties pair statistic, degraded as positive."""
    wins = 0.0
    for o in ood_scores:
        for i in id_scores:
            if o > i:
                wins += 1.0
            elif o == i:
                wins += 0.5
    return wins / (len(id_scores) * len(ood_scores))


def ema_sequence_oracle(start, batch_means, momentum):
    """Recursive renormalized EMA, recomputed step by step in float64."""
    mu = np.asarray(start, dtype=np.float64)
    mu = mu / np.linalg.norm(mu)
    trace = []
    for mean in batch_means:
        mu = momentum * mu + (1.0 - momentum) * np.asarray(mean, dtype=np.float64)
        mu = mu / np.linalg.norm(mu)
        trace.append(mu.copy())
    return trace


def attention_pool_oracle(reduced, scores):
    """Explicit double-loop softmax-weighted sum over positions."""
    d, h, w = reduced.shape
    flat_scores = [float(scores[y, x]) for y in range(h) for x in range(w)]
    m = max(flat_scores)
    exps = [math.exp(s - m) for s in flat_scores]
    z = sum(exps)
    out = np.zeros(d, dtype=np.float64)
    p = 0
    for y in range(h):
        for x in range(w):
            out += (exps[p] / z) * reduced[:, y, x].astype(np.float64)
            p += 1
    return out


def reduce_1x1_oracle(feature_map, weight, bias):
    """Per-position dense matrix product for a 1x1 convolution."""
    c_in, h, w = feature_map.shape
    c_out = weight.shape[0]
    out = np.zeros((c_out, h, w), dtype=np.float64)
    for y in range(h):
        for x in range(w):
            vec = feature_map[:, y, x].astype(np.float64)
            out[:, y, x] = weight.reshape(c_out, c_in).astype(np.float64) @ vec + bias.astype(np.float64)
    return out
