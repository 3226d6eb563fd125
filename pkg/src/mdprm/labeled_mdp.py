"""Labeled MDPs and the joint MDPRM interaction step."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import LabelError
from .rm import (
    EMPTY,
    RewardMachine,
    ValidationReport,
    _Sampler,
    normalize_row,
    rm_from_json,
    rm_to_json,
    row_problems,
    step_rm,
)

PAIRWISE = "pairwise"
TRIPLE = "triple"


class JointState(NamedTuple):
    q: int
    o: int


class Transition(NamedTuple):
    o_next: int
    label: int
    q_next: int
    reward: float


class LabeledMdp:
    """Observation-level MDP with a labeling function.

    ``labels`` maps ``(o, a)`` to a label index in pairwise mode and
    ``(o, a, o')`` in triple mode. Label indices refer to the alphabet of the
    reward machine this MDP is paired with.
    """

    def __init__(
        self,
        num_obs: int,
        num_actions: int,
        transitions: Mapping[tuple[int, int], Iterable[tuple[int, float]]],
        labels: Mapping[tuple, int],
        *,
        mode: str = PAIRWISE,
        validate: bool = True,
    ):
        if mode not in (PAIRWISE, TRIPLE):
            raise ValueError(f"unknown labeling mode {mode!r}")
        self.num_obs = int(num_obs)
        self.num_actions = int(num_actions)
        self.mode = mode
        self.P: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {
            (int(o), int(a)): normalize_row(row) for (o, a), row in transitions.items()
        }
        self.labels: dict[tuple, int] = {tuple(int(x) for x in k): int(v) for k, v in labels.items()}
        self._samplers = {key: _Sampler(row) for key, row in self.P.items()}
        if validate:
            validate_mdp(self).raise_if_invalid("labeled MDP")

    @property
    def triple(self) -> bool:
        return self.mode == TRIPLE

    def P_dense(self) -> np.ndarray:
        out = np.zeros((self.num_obs, self.num_actions, self.num_obs))
        for (o, a), row in self.P.items():
            for o2, p in row:
                out[o, a, o2] = p
        return out

    def support_sizes(self) -> np.ndarray:
        K = np.zeros((self.num_obs, self.num_actions), dtype=int)
        for (o, a), row in self.P.items():
            K[o, a] = len(row)
        return K

    def emitted_labels(self) -> set[int]:
        return set(self.labels.values())

    def __repr__(self) -> str:
        return f"LabeledMdp(O={self.num_obs}, A={self.num_actions}, mode={self.mode})"


def validate_mdp(m: LabeledMdp) -> ValidationReport:
    report = ValidationReport()
    O, A = m.num_obs, m.num_actions
    if O < 1 or A < 1:
        report.add("size", (O, A), "need at least one observation and one action")
    for o in range(O):
        for a in range(A):
            row = m.P.get((o, a))
            if row is None:
                report.add("missing-row", (o, a), "no transition row")
                continue
            for kind, detail in row_problems(row, O):
                report.add(kind, (o, a), detail)
            if m.triple:
                for o2, _ in row:
                    if (o, a, o2) not in m.labels:
                        report.add("missing-label", (o, a, o2), "no label for a possible transition")
            elif (o, a) not in m.labels:
                report.add("missing-label", (o, a), "no label")
    for key, lab in m.labels.items():
        if lab < 0:
            report.add("label-range", key, f"negative label {lab}")
    return report


def label_of(m: "LabeledMdp | Mdprm", o: int, a: int, o_next: int | None = None) -> int:
    mdp = m.mdp if isinstance(m, Mdprm) else m
    if mdp.triple:
        if o_next is None:
            raise LabelError("triple-mode labeling needs the next observation")
        key = (o, a, o_next)
    else:
        key = (o, a)
    try:
        return mdp.labels[key]
    except KeyError:
        raise LabelError(f"no label defined at {key}") from None


@dataclass(frozen=True)
class Mdprm:
    """A labeled MDP paired with a reward machine, plus the initial joint state."""

    mdp: LabeledMdp
    rm: RewardMachine
    name: str = "mdprm"
    init: JointState = JointState(0, 0)

    def __post_init__(self):
        bad = sorted(x for x in self.mdp.emitted_labels() if x >= self.rm.alphabet_size)
        if bad:
            raise LabelError(f"labels {bad} are outside the reward machine alphabet")
        object.__setattr__(self, "init", JointState(*self.init))

    @property
    def O(self) -> int:
        return self.mdp.num_obs

    @property
    def A(self) -> int:
        return self.mdp.num_actions

    @property
    def Q(self) -> int:
        return self.rm.num_states

    @property
    def S(self) -> int:
        return self.rm.num_states * self.mdp.num_obs

    def encode(self, q: int, o: int) -> int:
        return q * self.mdp.num_obs + o

    def decode(self, s: int) -> JointState:
        return JointState(*divmod(s, self.mdp.num_obs))


def step_env(m: Mdprm, s: JointState, a: int, rng) -> Transition:
    """One step of the interaction: o' from P, label, then the machine moves."""
    q, o = s
    mdp = m.mdp
    o_next = mdp._samplers[(o, a)].draw(rng)
    sigma = mdp.labels[(o, a, o_next)] if mdp.triple else mdp.labels[(o, a)]
    q_next, r = step_rm(m.rm, q, sigma, rng)
    return Transition(o_next, sigma, q_next, r)


def sample_joint(m: Mdprm, s: JointState, a: int, n: int, seed: int) -> np.ndarray:
    """Vectorized draw of ``n`` independent (o', q') outcomes from ``(s, a)``.

    Returns an ``(n, 2)`` integer array. Used for Monte-Carlo checks where the
    per-step Python loop would be too slow.
    """
    rng = np.random.default_rng(seed)
    q, o = s
    row = m.mdp.P[(o, a)]
    obs = np.array([i for i, _ in row])
    o_next = obs[rng.choice(len(row), size=n, p=[p for _, p in row])]
    q_next = np.empty(n, dtype=int)
    for o2 in np.unique(o_next):
        sel = o_next == o2
        sigma = label_of(m, o, a, int(o2) if m.mdp.triple else None)
        if sigma == EMPTY:
            q_next[sel] = q
            continue
        trow = m.rm.tau.get((q, sigma))
        if trow is None:
            raise LabelError(f"label {sigma} is not relevant at RM state {q}")
        states = np.array([i for i, _ in trow])
        q_next[sel] = states[rng.choice(len(trow), size=int(sel.sum()), p=[p for _, p in trow])]
    return np.column_stack([o_next, q_next])


def mdp_to_json(m: LabeledMdp, alphabet) -> dict:
    entries = [
        {"key": list(k), "label": alphabet[v]} for k, v in sorted(m.labels.items())
    ]
    return {
        "num_obs": m.num_obs,
        "num_actions": m.num_actions,
        "transitions": [
            {"o": o, "a": a, "next": [[o2, p] for o2, p in row]} for (o, a), row in sorted(m.P.items())
        ],
        "labels": {"mode": m.mode, "entries": entries},
    }


def mdp_from_json(d: Mapping, alphabet, *, validate: bool = True) -> LabeledMdp:
    index = {a: i for i, a in enumerate(alphabet)}

    def lab(name):
        if name not in index:
            raise LabelError(f"label {name!r} not in alphabet")
        return index[name]

    transitions = {(e["o"], e["a"]): [tuple(x) for x in e["next"]] for e in d["transitions"]}
    labels = {tuple(e["key"]): lab(e["label"]) for e in d["labels"]["entries"]}
    return LabeledMdp(d["num_obs"], d["num_actions"], transitions, labels,
                      mode=d["labels"]["mode"], validate=validate)


def mdprm_to_json(m: Mdprm) -> dict:
    return {
        "format": "mdprm/1",
        "name": m.name,
        "init": {"q": m.init.q, "o": m.init.o},
        "rm": rm_to_json(m.rm),
        "mdp": mdp_to_json(m.mdp, m.rm.alphabet),
    }


def mdprm_from_json(d: Mapping, *, validate: bool = True) -> Mdprm:
    rm = rm_from_json(d["rm"], validate=validate)
    mdp = mdp_from_json(d["mdp"], rm.alphabet, validate=validate)
    init = d.get("init", {"q": 0, "o": 0})
    return Mdprm(mdp, rm, d.get("name", "mdprm"), JointState(init["q"], init["o"]))
