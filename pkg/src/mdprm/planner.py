"""Extended value iteration, inner maximizers and gain oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._kernels_py import box_batch, descending_order, l1_batch
from .cross_product import TabularMdp
from .errors import ConvergenceError, MdprmError

EVI_CAP = 100_000


class InfeasibleBoxError(MdprmError):
    pass


def maxp_l1(u, p_hat, radius: float) -> np.ndarray:
    """Distribution maximizing p @ u over the L1 ball of ``radius`` around ``p_hat``.

    ``p_hat`` may be sub-stochastic; an all-zero row with radius >= 2 yields the
    point mass on the best state.
    """
    u = np.asarray(u, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    if p_hat.sum() > 1.0 + 1e-9:
        raise ValueError("p_hat must sum to at most 1")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return l1_batch(p_hat, np.float64(radius), descending_order(u))


def maxp_b(u, lo, hi) -> np.ndarray:
    """Distribution maximizing p @ u subject to lo <= p <= hi entrywise."""
    u = np.asarray(u, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi + 1e-15):
        raise InfeasibleBoxError("lower bound exceeds upper bound")
    if hi.sum() < 1.0 - 1e-12:
        raise InfeasibleBoxError(f"upper bounds sum to {hi.sum()!r} < 1")
    if lo.sum() > 1.0 + 1e-12:
        raise InfeasibleBoxError(f"lower bounds sum to {lo.sum()!r} > 1")
    return box_batch(lo, hi, descending_order(u))


@dataclass
class L1Set:
    """Rows ``center[s, a]`` with L1 radius ``radius[s, a]``."""

    center: np.ndarray
    radius: np.ndarray

    def contains(self, P: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(P - self.center).sum(-1) <= self.radius + tol))

    def maximize(self, u) -> np.ndarray:
        return l1_batch(self.center, self.radius, descending_order(np.asarray(u, dtype=float)))


@dataclass
class BoxSet:
    """Entrywise intervals ``lo[s, a, s'] <= p <= hi[s, a, s']``."""

    lo: np.ndarray
    hi: np.ndarray

    def contains(self, P: np.ndarray, tol: float = 1e-12) -> bool:
        return bool(np.all((P >= self.lo - tol) & (P <= self.hi + tol)))

    def maximize(self, u) -> np.ndarray:
        return box_batch(self.lo, self.hi, descending_order(np.asarray(u, dtype=float)))


def singleton(P: np.ndarray) -> L1Set:
    return L1Set(np.asarray(P, dtype=float), np.zeros(P.shape[:2]))


@dataclass
class EviResult:
    policy: np.ndarray
    u: np.ndarray
    gain_estimate: float
    iterations: int
    converged: bool


def evi(rbar, model_set, eps: float, iter_cap: int = EVI_CAP, *, aperiodic: bool = False) -> EviResult:
    """Extended value iteration from u = 0 with span stopping and re-centering.

    With ``aperiodic=True`` every plausible kernel p is replaced by
    (1_s + p)/2. Gains are unchanged, but periodic optimistic models then
    converge under the span rule.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    alpha = 0.5 if aperiodic else 0.0
    rbar = np.ascontiguousarray(rbar, dtype=float)
    if isinstance(model_set, L1Set):
        out = kernels.evi_l1(np.ascontiguousarray(model_set.center, dtype=float),
                             np.ascontiguousarray(model_set.radius, dtype=float), rbar, eps, iter_cap, alpha)
    elif isinstance(model_set, BoxSet):
        out = kernels.evi_box(np.ascontiguousarray(model_set.lo, dtype=float),
                              np.ascontiguousarray(model_set.hi, dtype=float), rbar, eps, iter_cap, alpha)
    else:
        raise TypeError(f"unsupported model set {type(model_set).__name__}")
    u, policy, gain, iters, converged = out
    return EviResult(np.asarray(policy, dtype=int), np.asarray(u), float(gain), int(iters), bool(converged))


@dataclass
class GainResult:
    gain: float
    lo: float
    hi: float
    policy: np.ndarray
    iterations: int

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _rvi(P: np.ndarray, r: np.ndarray, eps: float, cap: int) -> GainResult:
    """Relative value iteration on the lazy chain (I + P)/2, which has the same gains."""
    S, A, _ = P.shape
    u = np.zeros(S)
    for it in range(1, cap + 1):
        v = r + 0.5 * u[:, None] + 0.5 * (P @ u)
        new = v.max(1)
        d = new - u
        lo, hi = float(d.min()), float(d.max())
        if hi - lo <= eps:
            return GainResult(0.5 * (lo + hi), lo, hi, v.argmax(1), it)
        u = new - new[0]
    raise ConvergenceError(f"relative value iteration did not reach width {eps} in {cap} sweeps "
                           f"(last width {hi - lo:.3g}); the chain may be multichain")


def optimal_gain(mdp: TabularMdp, eps: float = 1e-6, cap: int = 10_000_000) -> GainResult:
    return _rvi(mdp.P, mdp.rbar, eps, cap)


def policy_gain(mdp: TabularMdp, policy, eps: float = 1e-6, cap: int = 10_000_000) -> GainResult:
    policy = np.asarray(policy, dtype=int)
    idx = np.arange(mdp.num_states)
    P = mdp.P[idx, policy][:, None, :]
    r = mdp.rbar[idx, policy][:, None]
    res = _rvi(P, r, eps, cap)
    res.policy = policy
    return res
