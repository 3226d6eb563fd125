"""Seeded simulation runs, regret accounting, sweeps and CSV traces."""

from __future__ import annotations

import hashlib
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .agents import AgentConfig, EpisodeHook, make_agent
from .cross_product import build_cross_product, diameter
from .envs import EnvSpec, build_env
from .errors import MdprmError, TraceFormatError, ValidationError
from .labeled_mdp import JointState, step_env
from .planner import optimal_gain

TRACE_FORMAT = "mdprm-trace/1"
COLUMNS = ("t", "cum_reward", "regret", "episode", "t_k")
GAIN_EPS = 1e-6


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    env: EnvSpec
    agent: AgentConfig
    horizon: int
    seed: int = 0
    stride: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be at least 1")
        if self.stride is not None and self.stride < 1:
            raise ValidationError("stride must be at least 1")

    @property
    def effective_stride(self) -> int:
        return self.stride if self.stride is not None else max(1, self.horizon // 10_000)

    def to_json(self) -> dict:
        out = {
            "env": self.env.to_json(),
            "agent": self.agent.to_json(),
            "horizon": self.horizon,
            "seed": self.seed,
            "stride": self.effective_stride,
        }
        if self.output is not None:
            out["output"] = self.output
        return out

    @classmethod
    def from_json(cls, d: Mapping) -> "RunConfig":
        try:
            return cls(
                env=EnvSpec.from_json(d["env"]),
                agent=AgentConfig(**d.get("agent", {})),
                horizon=int(d["horizon"]),
                seed=int(d.get("seed", 0)),
                stride=d.get("stride"),
                output=d.get("output"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed run config: {exc}") from None

    def config_hash(self, include_seed: bool = True) -> str:
        d = self.to_json()
        d.pop("output", None)
        if not include_seed:
            d.pop("seed")
        return _sha256(_canonical(d))[:16]


@dataclass
class RegretTrace:
    t: np.ndarray
    cum_reward: np.ndarray
    regret: np.ndarray
    episode: np.ndarray
    t_k: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def g_star(self) -> float:
        return float(self.meta["g_star"])

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])

    @property
    def num_episodes(self) -> int:
        return int(self.episode[-1])

    def regret_at(self, t: int) -> float:
        i = int(np.searchsorted(self.t, t))
        if i >= len(self.t) or self.t[i] != t:
            raise KeyError(f"no row at t={t}")
        return float(self.regret[i])

    def rows_text(self) -> str:
        lines = [",".join(COLUMNS)]
        for row in zip(self.t.tolist(), self.cum_reward.tolist(), self.regret.tolist(),
                       self.episode.tolist(), self.t_k.tolist()):
            lines.append(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]},{row[4]}")
        return "\n".join(lines) + "\n"


def seeds_for(seed: int) -> tuple[int, int]:
    """Independent environment and agent seeds derived from one run seed."""
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return int(env_ss.generate_state(1)[0]), int(agent_ss.generate_state(1)[0])


def run(config: RunConfig, episode_hook: EpisodeHook | None = None, *, env=None, agent=None) -> RegretTrace:
    """Simulate ``config.horizon`` steps and account regret against the optimal gain.

    ``env`` and ``agent`` override what the config would build; a custom agent
    needs ``act``, ``observe``, ``k``, ``t_k`` and ``metadata``.
    """
    m = env if env is not None else build_env(config.env)
    cross = build_cross_product(m)
    gain = optimal_gain(cross, GAIN_EPS)
    g = gain.gain
    env_seed, agent_seed = seeds_for(config.seed)
    rng = random.Random(env_seed)
    if agent is None:
        agent = make_agent(m, config.agent, agent_seed, episode_hook)
    T, stride = config.horizon, config.effective_stride
    rows_t, rows_c, rows_k, rows_tk = [], [], [], []
    s = JointState(*m.init)
    cum = 0.0
    act, observe = agent.act, agent.observe
    for t in range(1, T + 1):
        a = act(s)
        tr = step_env(m, s, a, rng)
        cum += tr.reward
        boundary = observe(s, a, tr)
        s = JointState(tr.q_next, tr.o_next)
        if boundary or t % stride == 0 or t == T:
            rows_t.append(t)
            rows_c.append(cum)
            rows_k.append(agent.k)
            rows_tk.append(agent.t_k)
    t_arr = np.array(rows_t, dtype=np.int64)
    c_arr = np.array(rows_c)
    meta = {
        "format": TRACE_FORMAT,
        "env": m.name,
        "variant": config.agent.variant,
        "g_star": g,
        "g_star_interval": [gain.lo, gain.hi],
        "diameter_cross": diameter(cross),
        "seed": config.seed,
        "env_seed": env_seed,
        "agent_seed": agent_seed,
        "config": {k: v for k, v in config.to_json().items() if k != "output"},
        "config_hash": config.config_hash(),
        "agent": agent.metadata(),
        "episodes": agent.k,
        "backend": kernels.BACKEND,
    }
    trace = RegretTrace(t_arr, c_arr, t_arr * g - c_arr, np.array(rows_k, dtype=np.int64),
                        np.array(rows_tk, dtype=np.int64), meta)
    trace.agent = agent  # kept for in-process inspection; not serialized
    if config.output:
        export_csv(trace, config.output)
    return trace


# ---------------------------------------------------------------- CSV


def export_csv(trace: RegretTrace, path) -> None:
    body = trace.rows_text()
    meta = dict(trace.meta)
    meta["rows_sha256"] = _sha256(body)
    head = "".join(f"# {k}: {_canonical(v)}\n" for k, v in meta.items())
    Path(path).write_text(head + body)


def import_csv(path) -> RegretTrace:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise TraceFormatError(f"cannot read {path}: {exc}") from None
    meta, body_lines = {}, []
    for line in text.splitlines(keepends=True):
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition(": ")
            if not sep:
                raise TraceFormatError(f"malformed metadata line: {line!r}")
            try:
                meta[key] = json.loads(value)
            except json.JSONDecodeError:
                raise TraceFormatError(f"metadata {key!r} is not JSON") from None
        else:
            body_lines.append(line)
    body = "".join(body_lines)
    expected = meta.pop("rows_sha256", None)
    if expected is None:
        raise TraceFormatError("missing rows_sha256 header")
    if _sha256(body) != expected:
        raise TraceFormatError("row hash mismatch: the file was modified or truncated")
    if not body_lines or body_lines[0].strip() != ",".join(COLUMNS):
        raise TraceFormatError(f"expected header {','.join(COLUMNS)!r}")
    cols = [[] for _ in COLUMNS]
    try:
        for line in body_lines[1:]:
            parts = line.strip().split(",")
            if len(parts) != len(COLUMNS):
                raise ValueError(line)
            cols[0].append(int(parts[0]))
            cols[1].append(float(parts[1]))
            cols[2].append(float(parts[2]))
            cols[3].append(int(parts[3]))
            cols[4].append(int(parts[4]))
    except ValueError as exc:
        raise TraceFormatError(f"malformed row: {exc}") from None
    return RegretTrace(np.array(cols[0], dtype=np.int64), np.array(cols[1]), np.array(cols[2]),
                       np.array(cols[3], dtype=np.int64), np.array(cols[4], dtype=np.int64), meta)


# ---------------------------------------------------------------- sweeps


@dataclass
class RunOutcome:
    config: RunConfig
    final_regret: float | None = None
    regret_over_time: float | None = None
    episodes: int | None = None
    error: str | None = None


def _run_one(config: RunConfig) -> RunOutcome:
    try:
        tr = run(config)
    except MdprmError as exc:
        return RunOutcome(config, error=f"{type(exc).__name__}: {exc}")
    return RunOutcome(config, tr.final_regret, tr.final_regret / config.horizon, tr.num_episodes)


@dataclass
class SummaryRow:
    config_hash: str
    variant: str
    env: str
    n: int
    mean_regret: float
    std: float
    min: float
    max: float
    errors: list[str]

    def to_json(self) -> dict:
        return dict(self.__dict__)


def sweep(configs: Sequence[RunConfig], parallelism: int = 1) -> list[SummaryRow]:
    """Run every config; group by everything but the seed. Failures are
    recorded per row and do not stop the sweep."""
    configs = list(configs)
    if parallelism > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_run_one, configs))
    else:
        outcomes = [_run_one(c) for c in configs]
    groups: dict[str, list[RunOutcome]] = {}
    for out in outcomes:
        groups.setdefault(out.config.config_hash(include_seed=False), []).append(out)
    rows = []
    for key, outs in groups.items():
        vals = np.array([o.final_regret for o in outs if o.error is None], dtype=float)
        nan = float("nan")
        rows.append(SummaryRow(
            config_hash=key,
            variant=outs[0].config.agent.variant,
            env=outs[0].config.env.family,
            n=len(vals),
            mean_regret=float(vals.mean()) if len(vals) else nan,
            std=float(vals.std(ddof=1)) if len(vals) > 1 else 0.0 if len(vals) else nan,
            min=float(vals.min()) if len(vals) else nan,
            max=float(vals.max()) if len(vals) else nan,
            errors=[f"seed {o.config.seed}: {o.error}" for o in outs if o.error is not None],
        ))
    return rows


def expand_seeds(config: RunConfig, seeds: Iterable[int]) -> list[RunConfig]:
    out = []
    for s in seeds:
        path = None
        if config.output:
            p = Path(config.output)
            path = str(p.with_name(f"{p.stem}-seed{s}{p.suffix or '.csv'}"))
        out.append(replace(config, seed=int(s), output=path))
    return out


def parse_seed_range(text: str) -> range:
    """'a..b' (inclusive) or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ValidationError(f"bad seed range {text!r}; expected 'a..b'") from None
    if hi < lo:
        raise ValidationError(f"empty seed range {text!r}")
    return range(lo, hi + 1)


def standard_error(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
