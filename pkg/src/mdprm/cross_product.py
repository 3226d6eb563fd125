"""The flat cross-product MDP and its structural diagnostics."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, LabelError, NonCommunicatingError
from .labeled_mdp import JointState, Mdprm
from .rm import EMPTY, ValidationReport

ROW_TOL = 1e-12


@dataclass
class TabularMdp:
    """Dense tabular MDP. ``P`` has shape (S, A, S) and ``rbar`` shape (S, A)."""

    P: np.ndarray
    rbar: np.ndarray

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.rbar = np.asarray(self.rbar, dtype=float)
        S, A, S2 = self.P.shape
        if S != S2 or self.rbar.shape != (S, A):
            raise ValueError("inconsistent shapes for P and rbar")
        if np.any(np.abs(self.P.sum(-1) - 1.0) > 1e-9):
            raise ValueError("transition rows must be stochastic")

    @property
    def num_states(self) -> int:
        return self.P.shape[0]

    @property
    def num_actions(self) -> int:
        return self.P.shape[1]


def _label_table(m: Mdprm) -> np.ndarray:
    """Label indices as an array of shape (O, A) or (O, A, O)."""
    O, A = m.O, m.A
    if m.mdp.triple:
        L = np.zeros((O, A, O), dtype=int)
        for (o, a, o2), lab in m.mdp.labels.items():
            L[o, a, o2] = lab
    else:
        L = np.zeros((O, A), dtype=int)
        for (o, a), lab in m.mdp.labels.items():
            L[o, a] = lab
    return L


def _check_defined(m: Mdprm, L: np.ndarray, P: np.ndarray) -> None:
    defined = np.zeros((m.Q, m.rm.alphabet_size), dtype=bool)
    for q, s in m.rm.tau:
        defined[q, s] = True
    if m.mdp.triple:
        used = P > 0
        for q in range(m.Q):
            bad = used & ~defined[q][L]
            if bad.any():
                o, a, o2 = map(int, np.argwhere(bad)[0])
                raise LabelError(f"label {m.rm.alphabet[L[o, a, o2]]!r} at (o={o}, a={a}, o'={o2}) "
                                 f"is undefined in RM state {q}")
    else:
        for q in range(m.Q):
            bad = ~defined[q][L]
            if bad.any():
                o, a = map(int, np.argwhere(bad)[0])
                raise LabelError(f"label {m.rm.alphabet[L[o, a]]!r} at (o={o}, a={a}) "
                                 f"is undefined in RM state {q}")


def build_cross_product(m: Mdprm) -> TabularMdp:
    """Px[(q,o), a, (q',o')] = P(o'|o,a) tau(q'|q,sigma), with s = q*O + o."""
    O, A, Q = m.O, m.A, m.Q
    P = m.mdp.P_dense()
    tau = m.rm.tau_dense()
    nubar = m.rm.mean_dense()
    L = _label_table(m)
    _check_defined(m, L, P)
    if m.mdp.triple:
        # T[q, o, a, o', q'] = tau[q, L[o, a, o'], q']
        T = tau[:, L, :]
        Px = np.einsum("xay,qxayr->qxary", P, T)
        rbar = np.einsum("xay,qxay->qxa", P, nubar[:, L])
    else:
        T = tau[:, L, :]  # (Q, O, A, Q)
        Px = np.einsum("xay,qxar->qxary", P, T)
        rbar = nubar[:, L]
    S = Q * O
    return TabularMdp(Px.reshape(S, A, S), rbar.reshape(S, A))


def observation_mdp(m: Mdprm) -> TabularMdp:
    """The labeled MDP alone, with zero rewards (used for its diameter)."""
    return TabularMdp(m.mdp.P_dense(), np.zeros((m.O, m.A)))


def _proper_policy(P: np.ndarray, target: int) -> np.ndarray:
    """Backward BFS from ``target``: each state picks the lowest action that
    reaches the already-covered set with positive probability."""
    S, A, _ = P.shape
    covered = np.zeros(S, dtype=bool)
    covered[target] = True
    pi = np.zeros(S, dtype=int)
    while True:
        reach = P[:, :, covered].sum(-1) > 0  # (S, A)
        new = ~covered & reach.any(1)
        if not new.any():
            break
        pi[new] = reach[new].argmax(1)
        covered |= new
    if not covered.all():
        raise NonCommunicatingError(
            f"states {np.flatnonzero(~covered)[:10].tolist()} cannot reach target {target}: "
            "possibly non-communicating"
        )
    return pi


def _hitting_pi(P: np.ndarray, target: int, max_iter: int = 10_000) -> np.ndarray:
    S = P.shape[0]
    pi = _proper_policy(P, target)
    nt = np.flatnonzero(np.arange(S) != target)
    Pn = P[nt][:, :, nt]  # (n, A, n)
    rows = np.arange(len(nt))
    pi_n = pi[nt]
    for _ in range(max_iter):
        M = np.eye(len(nt)) - Pn[rows, pi_n]
        h = np.linalg.solve(M, np.ones(len(nt)))
        Qv = 1.0 + Pn @ h
        best = Qv.argmin(1)
        cur = Qv[rows, pi_n]
        switch = Qv[rows, best] < cur - 1e-11 * (1.0 + np.abs(cur))
        if not switch.any():
            out = np.zeros(S)
            out[nt] = h
            return out
        pi_n = np.where(switch, best, pi_n)
    raise ConvergenceError("policy iteration for hitting times did not converge")


def _hitting_vi(P: np.ndarray, target: int, eps: float | None, max_iter: int) -> np.ndarray:
    S = P.shape[0]
    _proper_policy(P, target)
    Pt = P.copy()
    Pt[:, :, target] = 0.0
    h = np.zeros(S)
    for _ in range(max_iter):
        new = 1.0 + (Pt @ h).min(1)
        new[target] = 0.0
        tol = eps if eps is not None else 1e-6 * max(1.0, new.max())
        if np.max(np.abs(new - h)) <= tol:
            return new
        h = new
    raise ConvergenceError("hitting-time value iteration hit its cap: possibly non-communicating")


def bellman_residual(mdp: TabularMdp, target: int, h: np.ndarray) -> float:
    Pt = mdp.P.copy()
    Pt[:, :, target] = 0.0
    rhs = 1.0 + (Pt @ h).min(1)
    rhs[target] = 0.0
    return float(np.max(np.abs(rhs - h)))


def expected_hitting_times(
    mdp: TabularMdp,
    target: int,
    eps: float | None = None,
    *,
    method: str = "pi",
    max_iter: int = 1_000_000,
) -> np.ndarray:
    """Minimal expected time to reach ``target`` from every state.

    ``method="pi"`` runs policy iteration from a proper policy with exact linear
    solves; ``method="vi"`` runs value iteration to sup-norm tolerance ``eps``
    (default ``1e-6 * max h``).
    """
    if method == "pi":
        return _hitting_pi(mdp.P, target)
    if method == "vi":
        return _hitting_vi(mdp.P, target, eps, max_iter)
    raise ValueError(f"unknown method {method!r}")


def hitting_time_matrix(mdp: TabularMdp, eps: float | None = None, *, method: str = "pi") -> np.ndarray:
    """``H[s, t]`` is the minimal expected time from ``s`` to ``t``."""
    S = mdp.num_states
    H = np.empty((S, S))
    for t in range(S):
        H[:, t] = expected_hitting_times(mdp, t, eps, method=method)
    return H


def diameter(mdp: TabularMdp, eps: float | None = None, *, method: str = "pi") -> float:
    if mdp.num_states == 1:
        return 0.0
    return float(hitting_time_matrix(mdp, eps, method=method).max())


def _require_pairwise(m: Mdprm) -> None:
    if m.mdp.triple:
        raise LabelError("RM-reachable sets are defined for pairwise labeling only")


def reachable_rm_set(m: Mdprm, s: JointState) -> frozenset[int]:
    _require_pairwise(m)
    q, o = s
    out = set()
    for a in range(m.A):
        sigma = m.mdp.labels[(o, a)]
        if sigma == EMPTY:
            out.add(q)
            continue
        row = m.rm.tau.get((q, sigma))
        if row is None:
            raise LabelError(f"label {sigma} undefined at RM state {q}")
        out.update(q2 for q2, p in row if p > 0)
    return frozenset(out)


def _restricted(H: np.ndarray, B: frozenset[int], O: int) -> float:
    idx = np.array([q * O + o for q in sorted(B) for o in range(O)])
    if len(idx) < 2:
        return 0.0
    return float(H[np.ix_(idx, idx)].max())


def rm_restricted_diameter(m: Mdprm, s: JointState, eps: float | None = None,
                           *, H: np.ndarray | None = None) -> float:
    """Largest hitting time between states of ``B_s x O``; paths may leave that set."""
    if H is None:
        H = hitting_time_matrix(build_cross_product(m), eps)
    return _restricted(H, reachable_rm_set(m, s), m.O)


@dataclass
class StructureReport:
    diameter_cross: float
    K_oa: np.ndarray
    K_qsigma: dict[tuple[int, int], int]
    B_sets: dict[tuple[int, int], frozenset[int]] | None = None
    D_restricted: np.ndarray | None = None  # shape (Q, O)
    c_M: float | None = None
    c_M_prime: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "diameter_cross": self.diameter_cross,
            "K_oa": self.K_oa.tolist(),
            "K_qsigma": [{"q": q, "label": s, "K": k} for (q, s), k in sorted(self.K_qsigma.items())],
            "c_M": self.c_M,
            "c_M_prime": self.c_M_prime,
            "notes": self.notes,
        }
        if self.B_sets is not None:
            out["B_sets"] = [{"q": q, "o": o, "B": sorted(b)} for (q, o), b in sorted(self.B_sets.items())]
        if self.D_restricted is not None:
            out["D_restricted"] = self.D_restricted.tolist()
        return out


def structure_report(m: Mdprm, eps: float | None = None) -> StructureReport:
    H = hitting_time_matrix(build_cross_product(m), eps)
    Dx = float(H.max()) if H.size > 1 else 0.0
    K_oa = m.mdp.support_sizes()
    K_qs = {(q, s): len(row) for (q, s), row in m.rm.tau.items() if s != EMPTY}
    rep = StructureReport(Dx, K_oa, K_qs)
    if m.mdp.triple:
        rep.notes.append("triple labeling: B_s, D_s and c_M are undefined")
        return rep
    Q, O = m.Q, m.O
    rep.B_sets = {(q, o): reachable_rm_set(m, JointState(q, o)) for q in range(Q) for o in range(O)}
    D = np.array([[_restricted(H, rep.B_sets[(q, o)], O) for o in range(O)] for q in range(Q)])
    rep.D_restricted = D
    worst = (D ** 2).max(0)  # max over q, per o
    rep.c_M = float(worst.sum())
    rep.c_M_prime = float((K_oa * worst[:, None]).sum())
    return rep


def validate_closure(m: Mdprm) -> ValidationReport:
    """BFS over the joint states reachable from ``m.init``; every label emitted
    there must be EMPTY or relevant at the paired RM state."""
    report = ValidationReport()
    mdp, rm = m.mdp, m.rm
    start = tuple(m.init)
    seen = {start}
    queue = deque([start])
    while queue:
        q, o = queue.popleft()
        for a in range(m.A):
            for o2, p in mdp.P.get((o, a), ()):
                key = (o, a, o2) if mdp.triple else (o, a)
                sigma = mdp.labels.get(key)
                if sigma is None:
                    report.add("missing-label", key, "no label")
                    continue
                row = rm.tau.get((q, sigma))
                if row is None:
                    report.add("label-closure", (q, o, a),
                               f"label {rm.alphabet[sigma] if sigma < rm.alphabet_size else sigma!r} "
                               f"not relevant at RM state {q}")
                    continue
                for q2, _ in row:
                    if (q2, o2) not in seen:
                        seen.add((q2, o2))
                        queue.append((q2, o2))
    # de-duplicate repeated findings from multiple visits
    uniq = {}
    for v in report.violations:
        uniq.setdefault((v.kind, v.where), v)
    report.violations = list(uniq.values())
    return report
