"""Benchmark MDPRMs and a seeded random-instance generator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .cross_product import build_cross_product
from .errors import MdprmError, ValidationError
from .labeled_mdp import PAIRWISE, TRIPLE, JointState, LabeledMdp, Mdprm, mdprm_from_json
from .rm import EMPTY, RewardDistribution, RewardMachine

ONE = RewardDistribution.point_mass(1.0)
ZERO = RewardDistribution.point_mass(0.0)

# ---------------------------------------------------------------- laundry

UP, RIGHT, DOWN, LEFT = range(4)
_MOVES = {UP: (-1, 0), RIGHT: (0, 1), DOWN: (1, 0), LEFT: (0, -1)}
_PERP = {UP: (LEFT, RIGHT), DOWN: (LEFT, RIGHT), LEFT: (UP, DOWN), RIGHT: (UP, DOWN)}


@dataclass(frozen=True)
class LaundryLayout:
    width: int
    height: int
    basket: tuple[int, int]
    card: tuple[int, int]
    machine: tuple[int, int]
    wall_row: int  # wall lies between wall_row - 1 and wall_row
    door_col: int

    def cell(self, r: int, c: int) -> int:
        return r * self.width + c


def laundry_layout(width: int = 4, height: int = 4) -> LaundryLayout:
    """Two halls split by a horizontal wall with one door in the middle column.

    Basket and card sit in the upper corners, the machine in the middle of the
    bottom row.
    """
    if width < 4 or height < 4:
        raise ValidationError("laundry grid needs width and height of at least 4")
    mid = width // 2
    return LaundryLayout(width, height, (0, 0), (0, width - 1), (height - 1, mid), height // 2, mid)


def _blocked(lay: LaundryLayout, r: int, c: int, r2: int, c2: int) -> bool:
    if not (0 <= r2 < lay.height and 0 <= c2 < lay.width):
        return True
    crosses = {r, r2} == {lay.wall_row - 1, lay.wall_row}
    return crosses and c != lay.door_col


# RM states q1..q8 are stored as 0..7.
Q1, Q2, Q3, Q4, Q5, Q6, Q7, Q8 = range(8)
LAUNDRY_ALPHABET = ("EMPTY", "b", "c", "w")
_B, _C, _W = 1, 2, 3


def laundry_rm() -> RewardMachine:
    """Card/basket machine.

    q1 start, q2 basket in hand, q3 card in hand, q4 both, q6 clothes washed.
    Operating the machine with the card works w.p. 0.95; bare-handed it works
    w.p. 0.01. Operating it without clothes leads to penalty states (q5, q7,
    q8) that reset to q1 with zero reward. Returning the basket from q6 pays 1.
    """
    tau = {
        (Q1, _B): [(Q2, 1.0)], (Q1, _C): [(Q3, 1.0)], (Q1, _W): [(Q7, 0.01), (Q1, 0.99)],
        (Q2, _B): [(Q2, 1.0)], (Q2, _C): [(Q4, 1.0)], (Q2, _W): [(Q8, 0.01), (Q2, 0.99)],
        (Q3, _B): [(Q4, 1.0)], (Q3, _C): [(Q3, 1.0)], (Q3, _W): [(Q5, 0.95), (Q3, 0.05)],
        (Q4, _B): [(Q4, 1.0)], (Q4, _C): [(Q4, 1.0)], (Q4, _W): [(Q6, 0.95), (Q4, 0.05)],
        (Q5, _B): [(Q5, 1.0)], (Q5, _C): [(Q1, 1.0)], (Q5, _W): [(Q5, 1.0)],
        (Q6, _B): [(Q1, 1.0)], (Q6, _C): [(Q6, 1.0)], (Q6, _W): [(Q6, 1.0)],
        (Q7, _B): [(Q1, 1.0)], (Q7, _C): [(Q7, 1.0)], (Q7, _W): [(Q7, 1.0)],
        (Q8, _B): [(Q1, 1.0)], (Q8, _C): [(Q8, 1.0)], (Q8, _W): [(Q8, 1.0)],
    }
    nu = {key: ZERO for key in tau}
    nu[(Q6, _B)] = ONE
    return RewardMachine(8, LAUNDRY_ALPHABET, tau, nu)


def laundry_gridworld(width: int = 4, height: int = 4, slip: float = 0.15) -> Mdprm:
    lay = laundry_layout(width, height)
    O = width * height
    P, labels = {}, {}
    marks = {lay.cell(*lay.basket): _B, lay.cell(*lay.card): _C, lay.cell(*lay.machine): _W}
    for r in range(height):
        for c in range(width):
            o = lay.cell(r, c)
            for a in range(4):
                row: dict[int, float] = {}
                for d, p in ((a, 1.0 - 2 * slip), (_PERP[a][0], slip), (_PERP[a][1], slip)):
                    dr, dc = _MOVES[d]
                    r2, c2 = r + dr, c + dc
                    dest = o if _blocked(lay, r, c, r2, c2) else lay.cell(r2, c2)
                    row[dest] = row.get(dest, 0.0) + p
                P[(o, a)] = sorted(row.items())
                labels[(o, a)] = marks.get(o, EMPTY)
    mdp = LabeledMdp(O, 4, P, labels, mode=PAIRWISE)
    return Mdprm(mdp, laundry_rm(), f"laundry-{width}x{height}", JointState(Q1, lay.cell(1, width // 2)))


# ---------------------------------------------------------------- cycle

CYCLE_ALPHABET = ("EMPTY", "A", "B")


def cycle_mdprm(Q: int = 6, delta: float = 0.2) -> Mdprm:
    """Q-state ring machine driven by a two-observation chain.

    At o0 both actions emit nothing. At o1, action 0 emits A (one step
    clockwise) and action 1 emits B (one step back). o0 moves to o1 w.p.
    delta; o1 returns to o0 w.p. 1 - delta. Events at ring state 0 pay 1.
    """
    if Q < 3:
        raise ValidationError("cycle env needs Q >= 3")
    if not 0.0 < delta < 0.5:
        raise ValidationError("cycle env needs delta in (0, 1/2)")
    P = {}
    for a in range(2):
        P[(0, a)] = [(0, 1.0 - delta), (1, delta)]
        P[(1, a)] = [(0, 1.0 - delta), (1, delta)]
    labels = {(0, 0): EMPTY, (0, 1): EMPTY, (1, 0): 1, (1, 1): 2}
    tau, nu = {}, {}
    for q in range(Q):
        tau[(q, 1)] = [((q + 1) % Q, 1.0)]
        tau[(q, 2)] = [((q - 1) % Q, 1.0)]
        nu[(q, 1)] = nu[(q, 2)] = ONE if q == 0 else ZERO
    rm = RewardMachine(Q, CYCLE_ALPHABET, tau, nu)
    return Mdprm(LabeledMdp(2, 2, P, labels), rm, f"cycle-Q{Q}-d{delta:g}")


# ---------------------------------------------------------------- lower bound

LB_ALPHABET = ("EMPTY", "A", "B", "AB")
_SA, _SB, _SAB = 1, 2, 3


def default_gap(O: int, A: int, D_target: float, T_planned: int) -> float:
    return min(0.25, math.sqrt(D_target / (O * A * T_planned)))


def tree_structure(n_nodes: int, A: int) -> tuple[dict[tuple[int, int], int], list[int]]:
    """Heap-ordered tree of minimum depth with at most A children per node.

    Returns the child taken by each (node, action) at internal nodes and the
    sorted list of leaves. An action whose child slot is empty goes to the
    node's last child.
    """
    moves, leaves = {}, []
    for i in range(n_nodes):
        kids = [k for k in range(i * A + 1, i * A + A + 1) if k < n_nodes]
        if not kids:
            leaves.append(i)
            continue
        for a in range(A):
            moves[(i, a)] = kids[min(a, len(kids) - 1)]
    return moves, leaves


def lower_bound_rm(Q: int) -> RewardMachine:
    """Good cycle q0..qN paying 1, bad cycle q0, q'1..q'N' paying 0."""
    N, Np = math.ceil((Q - 1) / 2), (Q - 1) // 2
    good = list(range(0, N + 1))  # q_i -> index i
    bad = [N + j for j in range(1, Np + 1)]  # q'_j -> index N + j
    tau, nu = {}, {}
    tau[(0, _SA)] = [(good[1], 1.0)]
    nu[(0, _SA)] = ONE
    tau[(0, _SB)] = [(bad[0] if Np else 0, 1.0)]
    nu[(0, _SB)] = ZERO
    for i in range(1, N + 1):
        nxt = good[i + 1] if i < N else 0
        tau[(i, _SA)] = [(nxt, 1.0)]
        tau[(i, _SB)] = [(nxt, 1.0)]
        tau[(i, _SAB)] = [(i, 1.0)]
        nu[(i, _SA)] = nu[(i, _SB)] = nu[(i, _SAB)] = ONE
    for j in range(1, Np + 1):
        nxt = bad[j] if j < Np else 0
        tau[(bad[j - 1], _SA)] = [(nxt, 1.0)]
        tau[(bad[j - 1], _SB)] = [(nxt, 1.0)]
        nu[(bad[j - 1], _SA)] = nu[(bad[j - 1], _SB)] = ZERO
    # unspecified transitions keep the state and pay nothing
    for q in range(Q):
        for s in (_SA, _SB, _SAB):
            if (q, s) not in tau:
                tau[(q, s)] = [(q, 1.0)]
                nu[(q, s)] = ZERO
    return RewardMachine(Q, LB_ALPHABET, tau, nu)


def lower_bound_mdprm(O: int = 8, A: int = 2, Q: int = 5, D_target: float = 200.0,
                      gap: float | None = None, hidden_index: int = 0,
                      T_planned: int = 100_000) -> Mdprm:
    """Bandit-like worst case: pick a leaf and an action, land in o_A or o_B.

    ``hidden_index`` j = 0 is the null instance; j >= 1 boosts o_A by ``gap``
    at leaf ``(j - 1) // A`` under action ``(j - 1) % A``.
    """
    if O < 3 or A < 2 or Q < 2:
        raise ValidationError("lower-bound family needs O >= 3, A >= 2, Q >= 2")
    if D_target < Q * (6 + 2 * math.log(O, A)):
        raise ValidationError(f"D_target must be at least Q(6 + 2 log_A O) = {Q * (6 + 2 * math.log(O, A)):.3f}")
    if gap is None:
        gap = default_gap(O, A, D_target, T_planned)
    if not 0.0 < gap <= 0.25:
        raise ValidationError("gap must lie in (0, 1/4]")
    n_tree = O - 2
    oA, oB = O - 2, O - 1
    moves, leaves = tree_structure(n_tree, A)
    if not 0 <= hidden_index <= len(leaves) * A:
        raise ValidationError(f"hidden_index must lie in [0, {len(leaves) * A}]")
    delta = 6 * Q / D_target
    P, labels = {}, {}
    for (i, a), child in moves.items():
        P[(i, a)] = [(child, 1.0)]
        labels[(i, a, child)] = EMPTY
    for li, leaf in enumerate(leaves):
        for a in range(A):
            eps = gap if hidden_index and (hidden_index - 1) == li * A + a else 0.0
            P[(leaf, a)] = [(oA, 0.5 + eps), (oB, 0.5 - eps)]
            labels[(leaf, a, oA)] = EMPTY
            labels[(leaf, a, oB)] = EMPTY
    for o, sig in ((oA, _SA), (oB, _SB)):
        for a in range(A):
            P[(o, a)] = [(0, delta), (o, 1.0 - delta)] if delta < 1 else [(0, 1.0)]
            labels[(o, a, 0)] = sig
            labels[(o, a, o)] = _SAB
    mdp = LabeledMdp(O, A, P, labels, mode=TRIPLE)
    return Mdprm(mdp, lower_bound_rm(Q), f"lowerbound-O{O}-A{A}-Q{Q}-j{hidden_index}")


# ---------------------------------------------------------------- random


def _strongly_connected(adj: np.ndarray) -> bool:
    def reach(M):
        seen = np.zeros(len(M), dtype=bool)
        seen[0] = True
        frontier = seen.copy()
        while frontier.any():
            nxt = M[frontier].any(0) & ~seen
            seen |= nxt
            frontier = nxt
        return seen.all()

    return reach(adj) and reach(adj.T)


def _random_row(rng, n: int, k_max: int):
    k = int(rng.integers(1, min(k_max, n) + 1))
    idx = np.sort(rng.choice(n, size=k, replace=False))
    w = rng.dirichlet(np.ones(k))
    return [(int(i), float(p)) for i, p in zip(idx, w)]


def random_mdprm(seed: int, O: int = 3, A: int = 2, Q: int = 3, num_labels: int = 3,
                 max_support: int = 2, max_tries: int = 1000) -> Mdprm:
    """Seeded random instance whose cross product is communicating.

    ``num_labels`` counts the non-empty labels. Every label has a machine row
    at every state, so any labeling is closed.
    """
    if min(O, A, Q, num_labels, max_support) < 1:
        raise ValidationError("sizes must be positive")
    rng = np.random.default_rng(seed)
    alphabet = ["EMPTY"] + [f"l{i}" for i in range(1, num_labels + 1)]
    for _ in range(max_tries):
        P = {(o, a): _random_row(rng, O, max_support) for o in range(O) for a in range(A)}
        labels = {(o, a): int(rng.integers(0, num_labels + 1)) for o in range(O) for a in range(A)}
        tau, nu = {}, {}
        for q in range(Q):
            for s in range(1, num_labels + 1):
                tau[(q, s)] = _random_row(rng, Q, max_support)
                nu[(q, s)] = RewardDistribution.bernoulli(float(rng.random()))
        m = Mdprm(LabeledMdp(O, A, P, labels), RewardMachine(Q, alphabet, tau, nu), f"random-{seed}")
        adj = build_cross_product(m).P.sum(1) > 0
        if _strongly_connected(adj):
            return m
    raise MdprmError(f"no communicating instance after {max_tries} draws (seed {seed})")


# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class EnvSpec:
    family: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def to_json(self) -> dict:
        out = {"family": self.family, "params": dict(self.params)}
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_json(cls, d: Mapping) -> "EnvSpec":
        if "family" not in d:
            raise ValidationError("env spec needs a 'family' field")
        return cls(d["family"], dict(d.get("params", {})), d.get("seed"))


FAMILIES = ("laundry", "cycle", "lower_bound", "random", "document")


def build_env(spec: EnvSpec) -> Mdprm:
    p = dict(spec.params)
    fam = spec.family
    try:
        if fam == "laundry":
            return laundry_gridworld(**p)
        if fam == "cycle":
            return cycle_mdprm(**p)
        if fam == "lower_bound":
            return lower_bound_mdprm(**p)
        if fam == "random":
            return random_mdprm(spec.seed if spec.seed is not None else p.pop("seed", 0), **p)
        if fam == "document":
            if "mdprm" in p:
                return mdprm_from_json(p["mdprm"])
            with open(p["path"]) as fh:
                return mdprm_from_json(json.load(fh))
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"bad parameters for {fam!r}: {exc}") from None
    raise ValidationError(f"unknown env family {fam!r}; expected one of {FAMILIES}")
