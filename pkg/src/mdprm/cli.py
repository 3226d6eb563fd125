"""Command-line entry point: ``mdprm run|sweep|inspect|diameter``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cross_product import structure_report
from .envs import EnvSpec, build_env
from .errors import ConvergenceError, LabelError, NonCommunicatingError, TraceFormatError, ValidationError
from .harness import RunConfig, expand_seeds, parse_seed_range, run, sweep
from .labeled_mdp import mdprm_from_json, mdprm_to_json

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from None


def _load_run_config(path: str) -> RunConfig:
    d = _load_json(path)
    env = d.get("env")
    if isinstance(env, str):  # path to an MDPRM document, relative to the config
        doc = (Path(path).parent / env).resolve()
        d = dict(d, env={"family": "document", "params": {"path": str(doc)}})
    return RunConfig.from_json(d)


def _load_env(path: str):
    d = _load_json(path)
    if "rm" in d and "mdp" in d:
        m = mdprm_from_json(d)
        return {"family": "document", "name": m.name}, m
    spec = EnvSpec.from_json(d.get("env", d))
    return spec.to_json(), build_env(spec)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, default=float))


def cmd_run(args) -> int:
    cfg = _load_run_config(args.config)
    if args.output:
        cfg = RunConfig(cfg.env, cfg.agent, cfg.horizon, cfg.seed, cfg.stride, args.output)
    tr = run(cfg)
    _print({
        "config_hash": tr.meta["config_hash"],
        "g_star": tr.g_star,
        "final_regret": tr.final_regret,
        "episodes": tr.num_episodes,
        "output": cfg.output,
    })
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_run_config(args.config)
    seeds = parse_seed_range(args.seeds) if args.seeds else [cfg.seed]
    rows = sweep(expand_seeds(cfg, seeds), args.jobs)
    _print([r.to_json() for r in rows])
    return EXIT_OK


def cmd_inspect(args) -> int:
    spec, m = _load_env(args.env)
    out = {
        "env": spec,
        "name": m.name,
        "sizes": {"O": m.O, "A": m.A, "Q": m.Q, "S": m.S, "labels": m.rm.alphabet_size, "E": m.rm.E},
        "labeling": m.mdp.mode,
        "structure": structure_report(m).to_json(),
    }
    if args.dump:
        out["document"] = mdprm_to_json(m)
    _print(out)
    return EXIT_OK


def cmd_diameter(args) -> int:
    _, m = _load_env(args.env)
    _print(structure_report(m).to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdprm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate one seeded run and write its regret trace")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="override the CSV path from the config")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run a config over a seed range and summarize")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", help="inclusive range a..b")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    i = sub.add_parser("inspect", help="print sizes and structural diagnostics of an env")
    i.add_argument("--env", required=True)
    i.add_argument("--dump", action="store_true", help="include the full MDPRM document")
    i.set_defaults(func=cmd_inspect)
    d = sub.add_parser("diameter", help="print the structure report of an env")
    d.add_argument("--env", required=True)
    d.set_defaults(func=cmd_diameter)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, LabelError, TraceFormatError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, NonCommunicatingError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
