"""Probabilistic reward machines."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LabelError, ValidationError

EMPTY = 0
EMPTY_NAME = "EMPTY"

# Row-sum tolerances: accept as-is, renormalize, or reject.
SUM_TOL = 1e-12
RENORM_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, where: tuple, detail: str = "") -> None:
        self.violations.append(Violation(kind, where, detail))

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def extend(self, other: "ValidationReport") -> None:
        self.violations.extend(other.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def raise_if_invalid(self, what: str = "model") -> None:
        if self.violations:
            lines = "\n  ".join(str(v) for v in self.violations[:20])
            raise ValidationError(f"invalid {what}:\n  {lines}", self)


def normalize_row(row: Iterable[tuple[int, float]]) -> tuple[tuple[int, float], ...]:
    """Merge duplicate indices, drop zeros, sort, and renormalize float noise.

    Rows off by more than RENORM_TOL are kept unnormalized so the validator
    can report them.
    """
    merged: dict[int, float] = {}
    for idx, p in row:
        merged[int(idx)] = merged.get(int(idx), 0.0) + float(p)
    items = tuple(sorted((i, p) for i, p in merged.items() if p != 0.0))
    total = sum(p for _, p in items)
    if SUM_TOL < abs(total - 1.0) < RENORM_TOL:
        items = tuple((i, p / total) for i, p in items)
    return items


def row_problems(row: Sequence[tuple[int, float]], size: int) -> list[tuple[str, str]]:
    out = []
    total = sum(p for _, p in row)
    if abs(total - 1.0) > SUM_TOL:
        out.append(("row-sum", f"sums to {total!r}"))
    for i, p in row:
        if not 0 <= i < size:
            out.append(("index-range", f"index {i} outside [0, {size})"))
        if not 0.0 <= p <= 1.0:
            out.append(("prob-range", f"probability {p!r} outside [0, 1]"))
    return out


class _Sampler:
    """Cumulative table for drawing from a sparse row with one uniform."""

    __slots__ = ("indices", "cum", "single")

    def __init__(self, row: Sequence[tuple[int, float]]):
        self.indices = [i for i, _ in row]
        self.cum = list(np.cumsum([p for _, p in row])) if row else []
        self.single = len(row) == 1

    def draw(self, rng) -> int:
        if self.single:
            return self.indices[0]
        k = bisect.bisect_right(self.cum, rng.random() * self.cum[-1])
        return self.indices[min(k, len(self.indices) - 1)]


@dataclass(frozen=True)
class RewardDistribution:
    kind: str  # "point", "bernoulli" or "finite"
    values: tuple[float, ...]
    probs: tuple[float, ...]

    @classmethod
    def point_mass(cls, v: float) -> "RewardDistribution":
        return cls("point", (float(v),), (1.0,))

    @classmethod
    def bernoulli(cls, p: float) -> "RewardDistribution":
        return cls("bernoulli", (0.0, 1.0), (1.0 - float(p), float(p)))

    @classmethod
    def finite(cls, values: Sequence[float], probs: Sequence[float]) -> "RewardDistribution":
        if len(values) != len(probs):
            raise ValueError("values and probs differ in length")
        return cls("finite", tuple(float(v) for v in values), tuple(float(p) for p in probs))

    def mean(self) -> float:
        return float(sum(v * p for v, p in zip(self.values, self.probs)))

    def problems(self) -> list[str]:
        out = []
        if abs(sum(self.probs) - 1.0) > SUM_TOL:
            out.append(f"probabilities sum to {sum(self.probs)!r}")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            out.append("support value outside [0, 1]")
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            out.append("probability outside [0, 1]")
        return out

    def sample(self, rng) -> float:
        if self.kind == "point":
            return self.values[0]
        if self.kind == "bernoulli":
            return 1.0 if rng.random() < self.probs[1] else 0.0
        u = rng.random()
        acc = 0.0
        for v, p in zip(self.values, self.probs):
            acc += p
            if u < acc:
                return v
        return self.values[-1]

    def to_json(self) -> dict:
        if self.kind == "point":
            return {"kind": "point", "value": self.values[0]}
        if self.kind == "bernoulli":
            return {"kind": "bernoulli", "p": self.probs[1]}
        return {"kind": "finite", "values": list(self.values), "probs": list(self.probs)}

    @classmethod
    def from_json(cls, d: Mapping) -> "RewardDistribution":
        kind = d["kind"]
        if kind == "point":
            return cls.point_mass(d["value"])
        if kind == "bernoulli":
            return cls.bernoulli(d["p"])
        if kind == "finite":
            return cls.finite(d["values"], d["probs"])
        raise ValueError(f"unknown reward distribution kind {kind!r}")


ZERO_REWARD = RewardDistribution.point_mass(0.0)


class RewardMachine:
    """A reward machine with stochastic transitions and reward distributions.

    ``transitions`` maps ``(q, label)`` to a sparse row ``[(q', prob), ...]``;
    ``rewards`` maps ``(q, label)`` to a :class:`RewardDistribution`. Label 0
    is the empty label: its transition defaults to the self-loop and its
    reward to zero.
    """

    def __init__(
        self,
        num_states: int,
        alphabet: Sequence[str],
        transitions: Mapping[tuple[int, int], Iterable[tuple[int, float]]],
        rewards: Mapping[tuple[int, int], RewardDistribution],
        *,
        validate: bool = True,
    ):
        alphabet = list(alphabet)
        if not alphabet or alphabet[0] != EMPTY_NAME:
            alphabet = [EMPTY_NAME] + [a for a in alphabet if a != EMPTY_NAME]
        self.num_states = int(num_states)
        self.alphabet: tuple[str, ...] = tuple(alphabet)
        self.tau: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {
            (int(q), int(s)): normalize_row(row) for (q, s), row in transitions.items()
        }
        self.nu: dict[tuple[int, int], RewardDistribution] = {
            (int(q), int(s)): d for (q, s), d in rewards.items()
        }
        for q in range(self.num_states):
            self.tau.setdefault((q, EMPTY), ((q, 1.0),))
            self.nu.setdefault((q, EMPTY), ZERO_REWARD)
        self.relevant: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(s for (qq, s) in self.tau if qq == q and s != EMPTY))
            for q in range(self.num_states)
        )
        self._samplers = {key: _Sampler(row) for key, row in self.tau.items()}
        if validate:
            validate_rm(self).raise_if_invalid("reward machine")

    @property
    def alphabet_size(self) -> int:
        return len(self.alphabet)

    @property
    def E(self) -> int:
        return max((len(r) for r in self.relevant), default=0)

    def label_index(self, name: str) -> int:
        try:
            return self.alphabet.index(name)
        except ValueError:
            raise LabelError(f"label {name!r} not in alphabet") from None

    def is_allowed(self, q: int, label: int) -> bool:
        return label == EMPTY or (q, label) in self.tau

    def tau_dense(self) -> np.ndarray:
        """Transition tensor of shape (Q, alphabet, Q); undefined rows are zero."""
        out = np.zeros((self.num_states, self.alphabet_size, self.num_states))
        for (q, s), row in self.tau.items():
            for q2, p in row:
                out[q, s, q2] = p
        return out

    def mean_dense(self) -> np.ndarray:
        out = np.zeros((self.num_states, self.alphabet_size))
        for (q, s), d in self.nu.items():
            out[q, s] = d.mean()
        return out

    def relevant_mask(self) -> np.ndarray:
        mask = np.zeros((self.num_states, self.alphabet_size), dtype=bool)
        for q, labels in enumerate(self.relevant):
            mask[q, list(labels)] = True
        return mask

    def __repr__(self) -> str:
        return f"RewardMachine(Q={self.num_states}, alphabet={list(self.alphabet)})"


def validate_rm(rm: RewardMachine) -> ValidationReport:
    report = ValidationReport()
    Q = rm.num_states
    for (q, s), row in sorted(rm.tau.items()):
        if not 0 <= q < Q:
            report.add("state-range", (q, s), f"state {q} outside [0, {Q})")
        if not 0 <= s < rm.alphabet_size:
            report.add("label-range", (q, s), f"label {s} outside alphabet")
        for kind, detail in row_problems(row, Q):
            report.add(kind, (q, s), detail)
        if s == EMPTY and row != ((q, 1.0),):
            report.add("empty-label convention", (q, s), "empty label must keep the state")
    for q, labels in enumerate(rm.relevant):
        for s in labels:
            if (q, s) not in rm.nu:
                report.add("missing-reward", (q, s), "no reward distribution for relevant label")
    for key, dist in sorted(rm.nu.items()):
        for detail in dist.problems():
            report.add("reward-distribution", key, detail)
    return report


def step_rm(rm: RewardMachine, q: int, label: int, rng) -> tuple[int, float]:
    """Advance the machine on ``label``; returns ``(next_state, reward)``."""
    sampler = rm._samplers.get((q, label))
    if sampler is None:
        raise LabelError(f"label {rm.alphabet[label] if label < rm.alphabet_size else label!r} "
                         f"is not relevant at RM state {q}")
    q_next = sampler.draw(rng)
    return q_next, rm.nu.get((q, label), ZERO_REWARD).sample(rng)


def mean_reward(rm: RewardMachine, q: int, label: int) -> float:
    try:
        return rm.nu[(q, label)].mean()
    except KeyError:
        raise LabelError(f"no reward defined for (q={q}, label={label})") from None


def is_deterministic(rm: RewardMachine) -> bool:
    return all(len(row) == 1 for row in rm.tau.values())


def rm_to_json(rm: RewardMachine) -> dict:
    name = rm.alphabet
    return {
        "num_states": rm.num_states,
        "alphabet": list(rm.alphabet),
        "transitions": [
            {"q": q, "label": name[s], "next": [[q2, p] for q2, p in row]}
            for (q, s), row in sorted(rm.tau.items())
        ],
        "rewards": [
            {"q": q, "label": name[s], "dist": d.to_json()} for (q, s), d in sorted(rm.nu.items())
        ],
    }


def rm_from_json(d: Mapping, *, validate: bool = True) -> RewardMachine:
    alphabet = list(d["alphabet"])
    if not alphabet or alphabet[0] != EMPTY_NAME:
        alphabet = [EMPTY_NAME] + [a for a in alphabet if a != EMPTY_NAME]
    index = {a: i for i, a in enumerate(alphabet)}

    def lab(name):
        if name not in index:
            raise LabelError(f"label {name!r} not in alphabet")
        return index[name]

    transitions = {(e["q"], lab(e["label"])): [tuple(x) for x in e["next"]] for e in d["transitions"]}
    rewards = {(e["q"], lab(e["label"])): RewardDistribution.from_json(e["dist"]) for e in d["rewards"]}
    return RewardMachine(d["num_states"], alphabet, transitions, rewards, validate=validate)
