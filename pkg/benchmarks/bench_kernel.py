"""Throughput of the compiled kernel against the pure-Python one.

    python3 benchmarks/bench_kernel.py [--events N] [--repeat R]

Both backends consume the same pre-drawn uniforms, so besides timing them the
script checks that they produce identical trajectories.
"""

from __future__ import annotations

import argparse
import time

from gcps.engine import BACKENDS, Mode, RunSpec, run
from gcps.presets import load_preset

CASES = [
    ("sqrt2", "ssa"),
    ("sqrt2", "ssa-fr"),
    ("sqrt2", "equi"),
    ("sqrt2", "seq"),
    ("lotka-renewable", "ssa"),
    ("lotka-finite", "ssa"),
]


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = sorted(BACKENDS)
    print(f"backends: {', '.join(backends)}; {args.events} events, best of {args.repeat}")
    print(f"{'model':<16} {'mode':<7}" + "".join(f"{b + ' ev/s':>16}" for b in backends)
          + f"{'speedup':>10}  same")
    for name, mode in CASES:
        m = load_preset(name)
        spec = RunSpec(Mode(mode), max_steps=args.events, seed=1, record="final")
        rates, results = {}, {}
        for b in backends:
            secs, traj = best_of(lambda: run(m, None, spec, backend=b), args.repeat)
            rates[b] = traj.steps / secs
            results[b] = traj
        same = all(results[b] == results[backends[0]] for b in backends)
        speed = rates["cython"] / rates["python"] if "cython" in rates else float("nan")
        print(f"{name:<16} {mode:<7}" + "".join(f"{rates[b]:>16,.0f}" for b in backends)
              + f"{speed:>9.1f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
