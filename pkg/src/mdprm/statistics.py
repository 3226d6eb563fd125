"""Visit counts, empirical estimates and confidence radii."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

L1 = "l1"
BERNSTEIN = "bernstein"


@dataclass(frozen=True)
class ConfidenceParams:
    delta: float = 0.05
    eta: float = 1.12
    mode: str = L1

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.eta > 1.0:
            raise ValueError(f"eta must exceed 1, got {self.eta}")
        if self.mode not in (L1, BERNSTEIN):
            raise ValueError(f"unknown mode {self.mode!r}")


class CountTables:
    """All counters an agent keeps.

    Factored tables are indexed by (o, a, o') and (q, sigma, q'); the flat
    tables by joint state s = q*O + o. Rewards are accumulated both per
    (q, sigma) and per (s, a).
    """

    def __init__(self, O: int, A: int, Q: int, num_labels: int):
        self.O, self.A, self.Q, self.num_labels = O, A, Q, num_labels
        S = Q * O
        self.N_oa = np.zeros((O, A), dtype=np.int64)
        self.N_oao = np.zeros((O, A, O), dtype=np.int64)
        self.N_qs = np.zeros((Q, num_labels), dtype=np.int64)
        self.N_qsq = np.zeros((Q, num_labels, Q), dtype=np.int64)
        self.N_sa = np.zeros((S, A), dtype=np.int64)
        self.N_sas = np.zeros((S, A, S), dtype=np.int64)
        self.reward_sum = np.zeros((Q, num_labels))
        self.reward_sum_sa = np.zeros((S, A))
        self.t = 0

    def record(self, q: int, o: int, a: int, sigma: int, r: float, o_next: int, q_next: int) -> None:
        O = self.O
        s, s_next = q * O + o, q_next * O + o_next
        self.N_oa[o, a] += 1
        self.N_oao[o, a, o_next] += 1
        self.N_qs[q, sigma] += 1
        self.N_qsq[q, sigma, q_next] += 1
        self.N_sa[s, a] += 1
        self.N_sas[s, a, s_next] += 1
        self.reward_sum[q, sigma] += r
        self.reward_sum_sa[s, a] += r
        self.t += 1

    def copy(self) -> "CountTables":
        out = CountTables(self.O, self.A, self.Q, self.num_labels)
        for name in ("N_oa", "N_oao", "N_qs", "N_qsq", "N_sa", "N_sas", "reward_sum", "reward_sum_sa"):
            setattr(out, name, getattr(self, name).copy())
        out.t = self.t
        return out

    def rows_consistent(self) -> bool:
        return (
            np.array_equal(self.N_oao.sum(-1), self.N_oa)
            and np.array_equal(self.N_qsq.sum(-1), self.N_qs)
            and np.array_equal(self.N_sas.sum(-1), self.N_sa)
        )


def effective(n):
    """The max{1, N} convention."""
    return np.maximum(1, n)


def empirical_p(c: CountTables, o=None, a=None) -> np.ndarray:
    """P-hat(.|o,a); all rows at once when ``o`` and ``a`` are omitted."""
    if o is None:
        return c.N_oao / effective(c.N_oa)[..., None]
    return c.N_oao[o, a] / max(1, c.N_oa[o, a])


def empirical_tau(c: CountTables, q=None, sigma=None) -> np.ndarray:
    if q is None:
        return c.N_qsq / effective(c.N_qs)[..., None]
    return c.N_qsq[q, sigma] / max(1, c.N_qs[q, sigma])


def empirical_flat(c: CountTables) -> np.ndarray:
    return c.N_sas / effective(c.N_sa)[..., None]


def _log_two_pow_minus_two(m):
    # ln(2^m - 2) = m ln 2 + ln(1 - 2^(1-m)), stable for large m
    m = np.asarray(m, dtype=float)
    return m * math.log(2.0) + np.log1p(-np.exp2(1.0 - m))


def beta_l1(n, delta, m):
    """L1 deviation radius for an m-outcome categorical after n samples."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be at least 1")
    if np.any(np.asarray(m) < 2):
        raise ValueError("support cardinality must be at least 2")
    inner = 0.5 * np.log(n + 1) + _log_two_pow_minus_two(m) - np.log(delta)
    out = np.sqrt(2.0 / n * (1.0 + 1.0 / n) * inner)
    return float(out) if out.ndim == 0 else out


def ell_peeling(n, delta, eta: float = 1.12):
    """Bernstein peeling term; the log argument is clamped at e so the result is at least eta."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be at least 1")
    if eta <= 1:
        raise ValueError("eta must exceed 1")
    arg = np.log(n + 1) * np.log(n * eta) / (delta * math.log(eta) ** 2)
    out = eta * np.log(np.maximum(arg, math.e))
    return float(out) if out.ndim == 0 else out


def reward_bonus(n, delta):
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be at least 1")
    out = np.sqrt(0.5 / n * (1.0 + 1.0 / n) * np.log(np.sqrt(n + 1) / delta))
    return float(out) if out.ndim == 0 else out


def bernstein_gap(u, p_hat, n, ell):
    """|p_hat - u| minus the Bernstein half-width at u; zero at a root."""
    u = np.asarray(u, dtype=float)
    return np.abs(p_hat - u) - np.sqrt(2.0 * u * (1.0 - u) * ell / n) - ell / (3.0 * n)


def bernstein_root(p_hat, n, ell, side: str = "upper", max_iter: int = 200):
    """Solve |p_hat - u| = sqrt(2u(1-u) ell/n) + ell/(3n) on one side of p_hat.

    Vectorized over broadcastable inputs. On each side the feasible set is an
    interval containing p_hat, so the gap changes sign once and bisection finds
    the crossing. When the equation has no root on the requested side, the
    boundary (0 or 1) is returned.
    """
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    p_hat, n, ell = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p_hat, n, ell)))
    scalar = p_hat.ndim == 0
    p_hat, n, ell = (np.atleast_1d(x).astype(float).copy() for x in (p_hat, n, ell))
    c = ell / (3.0 * n)
    if side == "upper":
        boundary = 1.0 - p_hat - c <= 0
        lo, hi = p_hat.copy(), np.ones_like(p_hat)
        out = np.ones_like(p_hat)
    else:
        boundary = p_hat - c <= 0
        lo, hi = np.zeros_like(p_hat), p_hat.copy()
        out = np.zeros_like(p_hat)
    active = ~boundary
    if active.any():
        ph, nn, ll = p_hat[active], n[active], ell[active]
        a, b = lo[active], hi[active]
        # inside: gap < 0 (near p_hat); outside: gap > 0 (near the boundary)
        for _ in range(max_iter):
            mid = 0.5 * (a + b)
            done = (mid <= a) | (mid >= b)
            if done.all():
                break
            g = bernstein_gap(mid, ph, nn, ll)
            inside = g < 0
            if side == "upper":
                a = np.where(inside & ~done, mid, a)
                b = np.where(~inside & ~done, mid, b)
            else:
                b = np.where(inside & ~done, mid, b)
                a = np.where(~inside & ~done, mid, a)
        ga = np.abs(bernstein_gap(a, ph, nn, ll))
        gb = np.abs(bernstein_gap(b, ph, nn, ll))
        out[active] = np.where(ga <= gb, a, b)
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def surrogate_radius_l1(c: CountTables, params: ConfidenceParams, o: int, a: int, q: int, sigma: int,
                        E: int) -> float:
    """L1 radius of the product row: the observation term plus the machine term."""
    O, A, Q = c.O, c.A, c.Q
    r_obs = beta_l1(max(1, c.N_oa[o, a]), params.delta / (2 * O * A), O)
    r_rm = beta_l1(max(1, c.N_qs[q, sigma]), params.delta / (2 * Q * E), Q)
    return r_obs + r_rm


def surrogate_interval_bernstein(c: CountTables, params: ConfidenceParams, s: int, a: int, s_next: int,
                                 labels, E: int) -> tuple[float, float]:
    """Interval around P-hat(o'|o,a) tau-hat(q'|q,sigma) for one product entry.

    ``labels`` is the labeling table, shape (O, A) or (O, A, O).
    """
    O, A, Q = c.O, c.A, c.Q
    q, o = divmod(s, O)
    q2, o2 = divmod(s_next, O)
    sigma = labels[o, a, o2] if labels.ndim == 3 else labels[o, a]
    n_oa = max(1, c.N_oa[o, a])
    n_qs = max(1, c.N_qs[q, sigma])
    p_hat = c.N_oao[o, a, o2] / n_oa
    t_hat = c.N_qsq[q, sigma, q2] / n_qs
    f = bernstein_half_width(p_hat, n_oa, t_hat, n_qs, params, O, A, Q, E)
    center = p_hat * t_hat
    return max(0.0, center - f), min(1.0, center + f)


def bernstein_half_width(p_hat, n_oa, t_hat, n_qs, params: ConfidenceParams, O, A, Q, E):
    """Half-width f of one product entry."""
    ell_p = ell_peeling(n_oa, params.delta / (4 * O * O * A), params.eta)
    ell_t = ell_peeling(n_qs, params.delta / (4 * Q * Q * E), params.eta)
    u = bernstein_root(p_hat, n_oa, ell_p, "upper")
    lam = bernstein_root(t_hat, n_qs, ell_t, "upper")
    return float(
        t_hat * np.sqrt(2.0 * u * (1.0 - u) * ell_p / n_oa)
        + t_hat * ell_p / (3.0 * n_oa)
        + u * np.sqrt(2.0 * lam * (1.0 - lam) * ell_t / n_qs)
        + u * ell_t / (3.0 * n_qs)
    )


# ---------------------------------------------------------------- product sets
#
# The builders below accept count arrays with any number of leading batch
# axes, so a whole history of counts can be turned into sets in one call.


def _gather_label_rows(arr: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """arr[..., q, sigma, q'] -> [..., q, o, a, q', o'] (o' axis of size 1 when pairwise)."""
    g = arr[..., :, labels, :]
    if labels.ndim == 3:
        return np.swapaxes(g, -1, -2)
    return g[..., None]


def _gather_label_cells(arr: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """arr[..., q, sigma] -> [..., q, o, a, o'] (o' axis of size 1 when pairwise)."""
    g = arr[..., :, labels]
    return g if labels.ndim == 3 else g[..., None]


def product_center(N_oa, N_oao, N_qs, N_qsq, labels, tau=None) -> np.ndarray:
    """P-hat(o'|o,a) tau-hat(q'|q,sigma) with shape (..., S, A, S).

    ``tau`` replaces the machine estimate when the machine is known. The empty
    label always keeps the machine state.
    """
    O, A = N_oa.shape[-2:]
    Q = N_qs.shape[-2]
    batch = N_oa.shape[:-2]
    p_hat = N_oao / effective(N_oa)[..., None]
    tau_t = np.broadcast_to(tau, batch + tau.shape).copy() if tau is not None \
        else N_qsq / effective(N_qs)[..., None]
    tau_t[..., :, 0, :] = np.eye(Q)
    center = p_hat[..., None, :, :, None, :] * _gather_label_rows(tau_t, labels)
    S = Q * O
    return center.reshape(batch + (S, A, S))


def product_l1_radius(N_oa, N_qs, labels, delta: float, E: int, tau_known: bool = False) -> np.ndarray:
    """Row radii beta(N_oa) + beta''(N_qs) with shape (..., S, A).

    In triple-labeled models the machine term takes the worst label over o'.
    """
    O, A = N_oa.shape[-2:]
    Q, num_labels = N_qs.shape[-2:]
    batch = N_oa.shape[:-2]
    r_obs = beta_l1(effective(N_oa), delta / (2 * O * A), O) if O > 1 else np.zeros(N_oa.shape)
    r_rm = np.zeros(N_qs.shape)
    if Q > 1 and not tau_known:
        r_rm = beta_l1(effective(N_qs), delta / (2 * Q * E), Q)
        r_rm[..., :, 0] = 0.0
    r_rm_g = _gather_label_cells(r_rm, labels).max(-1)  # (..., Q, O, A)
    radius = np.asarray(r_obs)[..., None, :, :] + r_rm_g
    return radius.reshape(batch + (Q * O, A))


def product_bernstein_box(N_oa, N_oao, N_qs, N_qsq, labels, delta: float, eta: float, E: int,
                          tau=None) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise [center - f, center + f] clipped to [0, 1], shape (..., S, A, S)."""
    O, A = N_oa.shape[-2:]
    Q = N_qs.shape[-2]
    batch = N_oa.shape[:-2]
    S = Q * O
    n_oa = effective(N_oa)[..., None]
    n_qs = effective(N_qs)[..., None]
    p_hat = N_oao / n_oa
    ell_p = ell_peeling(n_oa, delta / (4 * O * O * A), eta)
    u = bernstein_root(p_hat, n_oa, np.broadcast_to(ell_p, p_hat.shape), "upper")
    obs_term = np.sqrt(2 * u * (1 - u) * ell_p / n_oa) + ell_p / (3 * n_oa)
    if tau is None:
        tau_t = N_qsq / n_qs
        ell_t = ell_peeling(n_qs, delta / (4 * Q * Q * E), eta)
        lam = bernstein_root(tau_t, n_qs, np.broadcast_to(ell_t, tau_t.shape), "upper")
        rm_term = np.sqrt(2 * lam * (1 - lam) * ell_t / n_qs) + ell_t / (3 * n_qs)
    else:
        tau_t = np.broadcast_to(tau, batch + tau.shape).copy()
        rm_term = np.zeros(tau_t.shape)
    tau_t[..., :, 0, :] = np.eye(Q)
    rm_term[..., :, 0, :] = 0.0
    T = _gather_label_rows(tau_t, labels)
    center = p_hat[..., None, :, :, None, :] * T
    f = T * obs_term[..., None, :, :, None, :] + u[..., None, :, :, None, :] * _gather_label_rows(rm_term, labels)
    lo = np.clip(center - f, 0.0, 1.0).reshape(batch + (S, A, S))
    hi = np.clip(center + f, 0.0, 1.0).reshape(batch + (S, A, S))
    return lo, hi


def flat_l1(N_sa, N_sas, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Structure-oblivious L1 set: center and radius with delta/(SA) and 2^S - 2."""
    S, A = N_sa.shape[-2:]
    center = N_sas / effective(N_sa)[..., None]
    radius = beta_l1(effective(N_sa), delta / (S * A), S) if S > 1 else np.zeros(N_sa.shape)
    return center, np.asarray(radius, dtype=float)


def flat_bernstein_box(N_sa, N_sas, delta: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Structure-oblivious box: [lower root, upper root] per entry with delta/(4 S^2 A)."""
    S, A = N_sa.shape[-2:]
    n = effective(N_sa)[..., None]
    p_hat = N_sas / n
    ell = np.broadcast_to(ell_peeling(n, delta / (4 * S * S * A), eta), p_hat.shape)
    return bernstein_root(p_hat, n, ell, "lower"), bernstein_root(p_hat, n, ell, "upper")
