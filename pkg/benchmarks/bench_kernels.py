"""Compare the compiled and numpy EVI kernels on random model sets.

    python3 benchmarks/bench_kernels.py --sizes 24 96 384 --repeat 3
"""

import argparse
import time

import numpy as np

from mdprm import _kernels_py

try:
    from mdprm import _kernels as _compiled
except ImportError:
    _compiled = None


def instance(S: int, A: int, seed: int):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(S, 0.3), size=(S, A))
    radius = rng.uniform(0.05, 0.6, size=(S, A))
    half = rng.uniform(0.0, 0.1, size=P.shape)
    lo, hi = np.clip(P - half, 0, 1), np.clip(P + half, 0, 1)
    rbar = rng.uniform(0, 1, size=(S, A))
    return P, radius, lo, hi, rbar


def best_of(fn, repeat: int) -> tuple[float, tuple]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[24, 96, 384])
    ap.add_argument("--actions", type=int, default=4)
    ap.add_argument("--eps", type=float, default=1e-6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = {"python": _kernels_py}
    if _compiled is not None:
        backends["cython"] = _compiled
    else:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':<8}{'S':>6}{'iters':>8}" + "".join(f"{b + ' (ms)':>16}" for b in backends) + f"{'speedup':>10}")
    for S in args.sizes:
        P, radius, lo, hi, rbar = instance(S, args.actions, S)
        cases = {
            "evi_l1": lambda k: k.evi_l1(P, radius, rbar, args.eps, 100_000, 0.5),
            "evi_box": lambda k: k.evi_box(lo, hi, rbar, args.eps, 100_000, 0.5),
        }
        for name, call in cases.items():
            times, outs = {}, {}
            for b, mod in backends.items():
                times[b], outs[b] = best_of(lambda: call(mod), args.repeat)
            if len(outs) == 2:
                gap = abs(outs["python"][2] - outs["cython"][2])
                assert gap <= 1e-9, f"{name} backends disagree on the gain by {gap:g}"
            speed = f"{times['python'] / times['cython']:>9.1f}x" if "cython" in times else ""
            row = "".join(f"{1e3 * times[b]:>16.2f}" for b in backends)
            print(f"{name:<8}{S:>6}{outs['python'][3]:>8}{row}{speed}")


if __name__ == "__main__":
    main()
