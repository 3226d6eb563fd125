"""Optimistic learners for MDPRMs and the structure-oblivious baselines."""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .cross_product import _label_table, build_cross_product
from .errors import ConvergenceError, ValidationError
from .labeled_mdp import JointState, Mdprm, Transition
from .planner import EVI_CAP, BoxSet, EviResult, InfeasibleBoxError, L1Set, evi
from .rm import EMPTY
from .statistics import (
    CountTables,
    effective,
    flat_bernstein_box,
    flat_l1,
    product_bernstein_box,
    product_center,
    product_l1_radius,
    reward_bonus,
)

PRM_L1, PRM_B = "PRM_L1", "PRM_B"
RM_L1, RM_B = "RM_L1", "RM_B"
OBLIVIOUS_L1, OBLIVIOUS_B = "OBLIVIOUS_L1", "OBLIVIOUS_B"
RANDOM = "RANDOM"
VARIANTS = (PRM_L1, PRM_B, RM_L1, RM_B, OBLIVIOUS_L1, OBLIVIOUS_B, RANDOM)


@dataclass(frozen=True)
class AgentConfig:
    variant: str = PRM_L1
    delta: float = 0.05
    eta: float = 1.12
    known_rewards: bool = True
    known_tau: bool = False
    evi_cap: int = EVI_CAP
    aperiodic_evi: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0.0 < self.delta < 1.0:
            raise ValidationError("delta must lie in (0, 1)")
        if not self.eta > 1.0:
            raise ValidationError("eta must exceed 1")
        if self.evi_cap < 1:
            raise ValidationError("evi_cap must be positive")

    @property
    def uses_bernstein(self) -> bool:
        return self.variant.endswith("_B")

    @property
    def oblivious(self) -> bool:
        return self.variant.startswith("OBLIVIOUS")

    @property
    def tau_known(self) -> bool:
        return self.known_tau or self.variant.startswith("RM_")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class AgentContext:
    """What the learner is told about the task: sizes, labeling, the machine's
    graph (which labels are relevant where) and, depending on the variant,
    the machine's transition probabilities and mean rewards."""

    O: int
    A: int
    Q: int
    num_labels: int
    labels: np.ndarray  # (O, A) or (O, A, O)
    triple: bool
    E: int
    tau: np.ndarray | None = None  # (Q, Sigma, Q) when known
    nubar: np.ndarray | None = None  # (Q, Sigma) when known
    rbar_cross: np.ndarray | None = None  # (S, A) when known

    @property
    def S(self) -> int:
        return self.Q * self.O

    @classmethod
    def from_mdprm(cls, m: Mdprm, config: AgentConfig) -> "AgentContext":
        tau = m.rm.tau_dense() if config.tau_known else None
        known = config.known_rewards and not m.mdp.triple
        return cls(
            O=m.O, A=m.A, Q=m.Q, num_labels=m.rm.alphabet_size,
            labels=_label_table(m), triple=m.mdp.triple, E=max(1, m.rm.E),
            tau=tau,
            nubar=m.rm.mean_dense() if known else None,
            rbar_cross=build_cross_product(m).rbar if known else None,
        )


@dataclass
class EpisodeRecord:
    k: int
    t_k: int
    eps: float
    gain_estimate: float
    iterations: int
    converged: bool
    info: dict = field(default_factory=dict)


EpisodeHook = Callable[["Agent", object, np.ndarray, EviResult], dict | None]


class Agent:
    """UCRL-style learner; the variant picks the confidence family and the
    count structure."""

    def __init__(self, ctx: AgentContext, config: AgentConfig, seed: int = 0,
                 episode_hook: EpisodeHook | None = None):
        self.ctx, self.config = ctx, config
        self.counts = CountTables(ctx.O, ctx.A, ctx.Q, ctx.num_labels)
        self.rng = random.Random(seed)
        self.hook = episode_hook
        self.estimate_rewards = ctx.nubar is None and ctx.rbar_cross is None
        self.delta_p = config.delta / 2 if self.estimate_rewards else config.delta
        self.delta_r = config.delta / 2
        self.t = 1  # index of the next step
        self.k = 0
        self.t_k = 1
        self.policy = np.zeros(ctx.S, dtype=int)
        self.episodes: list[EpisodeRecord] = []
        self.gain_estimate = float("nan")
        if config.variant != RANDOM:
            self._start_episode()
        else:
            self.k = 1

    # -- interaction

    def act(self, s: JointState) -> int:
        if self.config.variant == RANDOM:
            return self.rng.randrange(self.ctx.A)
        return int(self.policy[s[0] * self.ctx.O + s[1]])

    def observe(self, s: JointState, a: int, tr: Transition) -> bool:
        """Record one step; returns True when a new episode starts."""
        q, o = s
        c = self.counts
        c.record(q, o, a, tr.label, tr.reward, tr.o_next, tr.q_next)
        self.t += 1
        if self.config.variant == RANDOM:
            return False
        if self._episode_over(q, o, a, tr.label):
            self._start_episode()
            return True
        return False

    def _episode_over(self, q, o, a, sigma) -> bool:
        ctx, cfg = self.ctx, self.config
        if cfg.oblivious:
            s = q * ctx.O + o
            self.nk_sa[s, a] += 1
            return self.nk_sa[s, a] >= max(1, self.Nk_sa[s, a])
        over = False
        self.nk_oa[o, a] += 1
        over |= self.nk_oa[o, a] >= max(1, self.Nk_oa[o, a])
        if sigma != EMPTY and self._track_qs:
            self.nk_qs[q, sigma] += 1
            over |= self.nk_qs[q, sigma] >= max(1, self.Nk_qs[q, sigma])
        if ctx.triple and self.estimate_rewards:
            s = q * ctx.O + o
            self.nk_sa[s, a] += 1
            over |= self.nk_sa[s, a] >= max(1, self.Nk_sa[s, a])
        return bool(over)

    @property
    def _track_qs(self) -> bool:
        return not self.config.tau_known or (self.estimate_rewards and not self.ctx.triple)

    def _start_episode(self) -> None:
        c = self.counts
        self.k += 1
        self.t_k = self.t
        self.Nk_oa, self.Nk_qs, self.Nk_sa = c.N_oa.copy(), c.N_qs.copy(), c.N_sa.copy()
        self.nk_oa = np.zeros_like(c.N_oa)
        self.nk_qs = np.zeros_like(c.N_qs)
        self.nk_sa = np.zeros_like(c.N_sa)
        self.recompute_policy()

    # -- planning

    def recompute_policy(self) -> np.ndarray:
        eps = 1.0 / math.sqrt(self.t_k)
        model = self.model_set()
        rbar = self.optimistic_rewards()
        res = evi(rbar, model, eps, self.config.evi_cap, aperiodic=self.config.aperiodic_evi)
        rec = EpisodeRecord(self.k, self.t_k, eps, res.gain_estimate, res.iterations, res.converged)
        if self.hook is not None:
            rec.info = self.hook(self, model, rbar, res) or {}
        self.episodes.append(rec)
        if not res.converged:
            raise ConvergenceError(
                f"extended value iteration hit its cap of {self.config.evi_cap} sweeps "
                f"in episode {self.k} (t_k={self.t_k}); periodic optimistic models need aperiodic_evi=True"
            )
        self.policy = res.policy
        self.gain_estimate = res.gain_estimate
        return self.policy

    def model_set(self):
        if self.config.oblivious:
            return self._flat_set()
        return self._factored_set()

    def _factored_set(self):
        ctx, c, cfg = self.ctx, self.counts, self.config
        if cfg.uses_bernstein:
            lo, hi = product_bernstein_box(c.N_oa, c.N_oao, c.N_qs, c.N_qsq, ctx.labels,
                                           self.delta_p, cfg.eta, ctx.E, ctx.tau)
            return self._checked_box(lo, hi)
        center = product_center(c.N_oa, c.N_oao, c.N_qs, c.N_qsq, ctx.labels, ctx.tau)
        radius = product_l1_radius(c.N_oa, c.N_qs, ctx.labels, self.delta_p, ctx.E, ctx.tau is not None)
        return L1Set(center, radius)

    def _flat_set(self):
        c, cfg = self.counts, self.config
        if cfg.uses_bernstein:
            return self._checked_box(*flat_bernstein_box(c.N_sa, c.N_sas, self.delta_p, cfg.eta))
        return L1Set(*flat_l1(c.N_sa, c.N_sas, self.delta_p))

    @staticmethod
    def _checked_box(lo, hi) -> BoxSet:
        if np.any(hi.sum(-1) < 1.0 - 1e-12) or np.any(lo.sum(-1) > 1.0 + 1e-12):
            raise InfeasibleBoxError("confidence box does not meet the simplex")
        return BoxSet(np.ascontiguousarray(lo), np.ascontiguousarray(hi))

    def optimistic_rewards(self) -> np.ndarray:
        ctx, c = self.ctx, self.counts
        S, A = ctx.S, ctx.A
        if not self.estimate_rewards:
            if ctx.rbar_cross is not None:
                return ctx.rbar_cross.copy()
            return ctx.nubar[:, ctx.labels].reshape(S, A)
        if self.config.oblivious or ctx.triple:
            n = effective(c.N_sa)
            mean = c.reward_sum_sa / n
            return np.minimum(1.0, mean + reward_bonus(n, self.delta_r / (S * A)))
        n = effective(c.N_qs)
        Q, E = ctx.Q, ctx.E
        ucb = np.minimum(1.0, c.reward_sum / n + reward_bonus(n, self.delta_r / (Q * E)))
        ucb[:, EMPTY] = 0.0
        return ucb[:, ctx.labels].reshape(S, A)

    def metadata(self) -> dict:
        return {
            "variant": self.config.variant,
            "reward_estimation": (
                "known" if not self.estimate_rewards
                else "per-state-action" if (self.config.oblivious or self.ctx.triple) else "per-machine-event"
            ),
            "tau_known": self.config.tau_known,
            "triple_labels": self.ctx.triple,
        }


def make_agent(m: Mdprm, config: AgentConfig, seed: int = 0, episode_hook: EpisodeHook | None = None) -> Agent:
    return Agent(AgentContext.from_mdprm(m, config), config, seed, episode_hook)


def episode_bound(T: int, O: int, A: int, Q: int, E: int) -> float:
    """Upper bound on the number of episodes after T steps for factored agents."""
    def term(n):
        return n * math.log2(8 * T / n) if n > 0 else 0.0
    return term(O * A) + term(Q * E)


def flat_episode_bound(T: int, S: int, A: int) -> float:
    return S * A * math.log2(8 * T / (S * A))
