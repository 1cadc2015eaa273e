"""Compiled vs pure-Python kernels on the worklist solvers and the RK4 segment.

    python benchmarks/bench_kernels.py [--repeats N]

Both backends must agree exactly; the script checks that before timing.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from vczsynth import _kernels
from vczsynth.scenario import load_scenario
from vczsynth.sim import run, synthesize
from vczsynth.synthesis import _transpose

ROOT = Path(__file__).resolve().parents[1]


def best_of(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def worklist_jobs(kern, csr, goal):
    ptr, pairs, counts = _transpose(csr)
    m = csr.n_inputs
    allowed = np.ones(csr.n_cells, dtype=bool)

    def reach():
        return kern.reach_worklist(ptr, pairs, counts, m, goal, allowed)

    def safety():
        good = counts > 0
        return kern.safety_worklist(ptr, pairs, good, m, ~goal)

    return reach, safety


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the Python fallback is available")

    scara = load_scenario(ROOT / "scenarios" / "scara.yaml")
    res = synthesize(scara)
    csr = res.model.to_csr()
    goal = res.controller.tasks[0].goal
    pend = load_scenario(ROOT / "scenarios" / "pendulum.yaml")
    ctrl = synthesize(pend).controller

    rows = []
    results = {}
    for name in backends:
        kern = _kernels.load_backend(name)
        reach, safety = worklist_jobs(kern, csr, goal)
        t_reach, lev = best_of(reach, args.repeats)
        t_safe, inz = best_of(safety, args.repeats)
        t_sim, rr = best_of(lambda: run(pend, ctrl, backend=kern), args.repeats)
        results[name] = (lev, inz, rr.trajectory.x)
        rows.append((name, t_reach, t_safe, t_sim))

    ref = results[backends[0]]
    for name in backends[1:]:
        other = results[name]
        assert np.array_equal(ref[0], other[0]) and np.array_equal(ref[1], other[1])
        assert np.array_equal(ref[2], other[2]), "trajectories differ between backends"

    print(f"reach/safety worklists: {csr.n_cells} cells x {csr.n_inputs} inputs, {csr.n_transitions} transitions")
    print(f"closed loop: pendulum, {pend.sim.duration:g} s at dt = {pend.dt:g}")
    print(f"{'backend':<8} {'reach (s)':>10} {'safety (s)':>11} {'sim (s)':>9}")
    for name, a, b, c in rows:
        print(f"{name:<8} {a:>10.4f} {b:>11.4f} {c:>9.4f}")
    if len(rows) == 2:
        (_, a0, b0, c0), (_, a1, b1, c1) = rows
        print(f"speedup  {a1 / a0:>10.1f}x {b1 / b0:>10.1f}x {c1 / c0:>8.1f}x")


if __name__ == "__main__":
    main()
