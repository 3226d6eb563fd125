"""Pure numpy implementations of the inner maximizers and extended value iteration."""

from __future__ import annotations

import numpy as np


def descending_order(u: np.ndarray) -> np.ndarray:
    """Indices by decreasing u; ties keep the lower index first."""
    return np.argsort(-u, kind="stable")


def l1_batch(P: np.ndarray, radius: np.ndarray, desc: np.ndarray) -> np.ndarray:
    """Row-wise maximizer over {p in simplex : |p - P_i|_1 <= radius_i}.

    Rows of ``P`` may be sub-stochastic (an unvisited row is all zeros); the
    missing mass is always placed on the best state.
    """
    P = np.asarray(P, dtype=float)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), P.shape[:-1])
    best = desc[0]
    mass = P.sum(-1)
    deficit = np.maximum(1.0 - mass, 0.0)
    x = np.minimum(0.5 * (radius + deficit), 1.0 - P[..., best])
    x = np.maximum(x, deficit)
    y = x - deficit
    asc = desc[::-1][:-1]
    Pa = P[..., asc]
    before = np.cumsum(Pa, axis=-1) - Pa
    remove = np.clip(y[..., None] - before, 0.0, Pa)
    out = P.copy()
    out[..., best] += x
    out[..., asc] -= remove
    return out


def box_batch(lo: np.ndarray, hi: np.ndarray, desc: np.ndarray) -> np.ndarray:
    """Row-wise maximizer over {lo <= p <= hi, sum p = 1}."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rem = 1.0 - lo.sum(-1)
    gaps = (hi - lo)[..., desc]
    before = np.cumsum(gaps, axis=-1) - gaps
    add = np.clip(rem[..., None] - before, 0.0, gaps)
    out = lo.copy()
    out[..., desc] += add
    return out


def _evi(backup, rbar, eps, cap, alpha):
    S = rbar.shape[0]
    u = np.zeros(S)
    for it in range(1, cap + 1):
        desc = descending_order(u)
        v = rbar + (1.0 - alpha) * (backup(desc) @ u) + alpha * u[:, None]
        new = v.max(1)
        diff = new - u
        hi, lo = diff.max(), diff.min()
        if hi - lo <= eps:
            return new - new.min(), v.argmax(1), 0.5 * (hi + lo), it, True
        u = new - new.min()
    return u, v.argmax(1), 0.5 * (hi + lo), cap, False


def evi_l1(center, radius, rbar, eps, cap, alpha=0.0):
    return _evi(lambda desc: l1_batch(center, radius, desc), rbar, eps, cap, alpha)


def evi_box(lo, hi, rbar, eps, cap, alpha=0.0):
    return _evi(lambda desc: box_batch(lo, hi, desc), rbar, eps, cap, alpha)
