"""Acceptance criteria 1-11.

Each test records one ``criterion N: PASS|FAIL`` line; the lines are printed
in the terminal summary (see ``conftest.py``) and also to stdout.
"""

import filecmp
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from oracles import (
    closed_loop_invariant,
    closed_loop_reaches,
    invariant_set,
    posts_of,
    random_csr,
    reach_levels,
)
from vczsynth.abstraction import InputGrid, build_model, check_frr
from vczsynth.baseline import benchmark
from vczsynth.cli import main as cli_main
from vczsynth.confinement import (
    FeasibilityBounds,
    FunnelParams,
    VczParams,
    a_r_bound,
    check_feasibility,
    psi_constants,
    solve_least_conservative,
    solve_most_efficient,
)
from vczsynth.errors import InfeasibleTask
from vczsynth.geometry import GridSpec, IntervalBox
from vczsynth.plants import DisturbanceSpec
from vczsynth.sim import SimConfig, run, synthesize
from vczsynth.specification import tighten
from vczsynth.synthesis import solve_invariance, solve_reach_avoid

RESULTS = {}

PEND_BOUNDS = FeasibilityBounds(3.0, 3.0, 1.0, 0.5, 0.1, 2.0)
PEND_FUNNEL = FunnelParams(1.0, 0.01, 1.0)
SCARA_BOUNDS = FeasibilityBounds(1.5, 1.6, 5.0, 0.2, [0.2, 0.2], 10.0)
SCARA_FUNNEL = FunnelParams(0.1, 0.01, 0.1)


def verdict(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def pendulum_runs(pendulum, controller, count):
    """``count`` seeded 60 s runs, half sinusoidal and half uniform-random, amplitude 0.5."""
    out = []
    for k in range(count):
        if k % 2 == 0:
            rng = np.random.default_rng(k)
            dist = DisturbanceSpec("sinusoidal", 0.5, float(rng.uniform(0.05, 2.0)), float(rng.uniform(0, 2 * np.pi)))
        else:
            dist = DisturbanceSpec("uniform-random", 0.5)
        scn = replace(pendulum, disturbance=dist, sim=SimConfig(duration=60.0, seed=k))
        out.append(run(scn, controller, seed=k))
    return out


def test_criterion_01_feasibility_arithmetic():
    rep = check_feasibility(PEND_BOUNDS, PEND_FUNNEL, VczParams(0.018, 0.1, 0.1, 0.02))
    rhs = float(rep.torque_rhs[0])
    ok = abs(rhs - 1.997) <= 1e-3 and rep.passed and abs(float(rep.a_r[0]) - 2.5) < 1e-9
    verdict(1, ok, f"RHS = {rhs:.5f} <= tau_bar = 2, a_r = {float(rep.a_r[0]):.4f}")


def test_criterion_02_parameter_solvers():
    lam_p, _ = solve_most_efficient(PEND_BOUNDS, PEND_FUNNEL)
    lam_s, _ = solve_most_efficient(SCARA_BOUNDS, SCARA_FUNNEL)
    lc = solve_least_conservative(PEND_BOUNDS, PEND_FUNNEL)
    lams = np.linspace(lc.lam_min * 1.01, 0.05, 200)
    got = np.array([lc.u_max(l)[0] for l in lams])
    want = np.minimum(0.1, 11.156 * lams - 0.1)
    rel = float(np.max(np.abs(got - want) / np.abs(want)))
    ok = (abs(lam_p - 0.0179) <= 1e-3 and abs(lam_s - 0.0186) <= 1e-3
          and abs(lc.lam_min - 0.009) <= 5e-4 and rel <= 5e-3)
    verdict(2, ok, f"lambda_me pendulum {lam_p:.5f}, SCARA {lam_s:.5f}; lambda_min {lc.lam_min:.5f}; "
                   f"u_max max rel err {rel:.2e}")


def test_criterion_03_reference_bound(pendulum, pendulum_synth):
    t0 = time.perf_counter()
    slope, ratio = psi_constants(resolution=1e-4)
    a_r = a_r_bound(0.1, 0.1, 0.018)
    res = run(pendulum, pendulum_synth.controller)
    traj = res.trajectory
    dvr = np.linalg.norm(np.diff(traj.v_r, axis=0), axis=1) / np.diff(traj.t)
    worst = float(dvr.max())
    secs = time.perf_counter() - t0
    ok = abs(slope - 1.35) <= 0.01 and ratio <= 0.9 and worst <= a_r and secs < 1.0
    verdict(3, ok, f"max dPsi/de = {slope:.4f}, max Psi(e)/e = {ratio:.4f}, "
                   f"max |dv_r/dt| = {worst:.4f} <= {a_r:.2f}, {secs:.2f} s")


def test_criterion_04_confinement_and_funnel(pendulum, pendulum_synth):
    t0 = time.perf_counter()
    runs = pendulum_runs(pendulum, pendulum_synth.controller, 20)
    secs = time.perf_counter() - t0
    lam = pendulum.vcz.lam
    violations = 0
    worst = 0.0
    for r in runs:
        t = r.trajectory
        dist = np.linalg.norm(t.x - t.xi, axis=1)
        worst = max(worst, float(dist.max()))
        bad = (dist >= lam) | np.any(np.abs(t.ev) >= t.rho, axis=1) | np.any(np.abs(t.tau) > 2.0, axis=1)
        bad |= np.any(np.abs(t.x) > 0.2, axis=1)
        violations += int(bad.sum()) + (0 if len(t) == 30001 else 1)
    ok = violations == 0 and secs < 30.0
    verdict(4, ok, f"{len(runs)} runs x 60 s, {violations} violations, max |x - xi| = {worst:.5f} < {lam}, "
                   f"{secs:.1f} s")


def test_criterion_05_frr(pendulum_synth):
    rep = check_frr(pendulum_synth.model, trials=100_000, seed=0)
    verdict(5, rep.passed, f"{rep.trials} trials, {rep.checked} enabled, {rep.n_counterexamples} counterexamples")


def _random_integrator(rng):
    nx, ny = int(rng.integers(4, 20)), int(rng.integers(3, 15))
    grid = GridSpec(IntervalBox([0.0, 0.0], [float(nx), float(ny)]), [1.0, 1.0])
    k = int(rng.choice([3, 5]))
    return build_model(grid, InputGrid([1.0, 1.0], k), float(rng.uniform(0.3, 1.8)))


def test_criterion_06_synthesis_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = mismatches = 0
    for i in range(60):
        model = random_csr(rng, int(rng.integers(20, 600)), int(rng.choice([3, 5, 7, 9]))) if i % 2 \
            else _random_integrator(rng)
        assert model.n_cells * model.n_inputs <= 10_000
        posts = posts_of(model)
        n = model.n_cells
        goal = rng.random(n) < 0.05
        goal[int(rng.integers(n))] = True
        unsafe = (rng.random(n) < 0.1) & ~goal
        stay = rng.random(n) < 0.95
        stay |= goal
        allowed = stay & ~unsafe
        want = reach_levels(posts, goal & allowed, allowed)
        ctrl = solve_reach_avoid(model, goal, unsafe, stay)
        win = set(np.flatnonzero(ctrl.winning).tolist())
        if win != set(want) or any(ctrl.value[c] != k for c, k in want.items()):
            mismatches += 1
        if closed_loop_reaches(posts, ctrl, goal & allowed) is not None:
            mismatches += 1
        safe = rng.random(n) < 0.8
        z = invariant_set(posts, safe)
        try:
            inv = solve_invariance(model, safe)
            got = set(np.flatnonzero(inv.winning).tolist())
            if got != z or closed_loop_invariant(posts, inv, safe) is not None:
                mismatches += 1
        except InfeasibleTask:
            if z:
                mismatches += 1
        checked += 1
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and checked >= 50 and secs < 60
    verdict(6, ok, f"{checked} random models (dense and explicit), {mismatches} mismatches, {secs:.1f} s")


def test_criterion_07_inter_sample(pendulum, pendulum_synth):
    lam_stay = tighten(pendulum.seq, pendulum.vcz.lam).tasks[0].stay
    runs = pendulum_runs(pendulum, pendulum_synth.controller, 6)
    samples = sum(len(r.trajectory) for r in runs)
    outside = sum(int((~lam_stay.contains_points(r.trajectory.xi)).sum()) for r in runs)
    verdict(7, outside == 0, f"{samples} dense samples of xi(t), {outside} outside {lam_stay.to_bounds()}")


def test_criterion_08_scara(scara):
    res = run(scara, synthesize(scara).controller)
    t = res.trajectory
    goal = scara.seq.tasks[0].goal[0]
    entered = np.flatnonzero(goal.contains_points(t.x))
    ok = res.ok and entered.size > 0 and res.report["specification"]["satisfied"]
    when = f"{t.t[entered[0]]:.2f} s" if entered.size else "never"
    verdict(8, ok, f"x enters G at {when}, monitors passed = {res.report['monitors_passed']}, "
                   f"max |x - xi| / lambda = {res.report['max_distance_ratio']:.3f}")


def test_criterion_09_multi_agent(agents):
    res = run(agents, synthesize(agents).controller)
    t = res.trajectory
    task = agents.seq.tasks[0]
    sep = task.separations[0]
    gaps = sep.gap(t.x)
    reached = bool(task.in_goal(t.x).any())
    hit = bool(task.in_obstacle(t.x).any())
    ok = res.ok and reached and not hit and float(gaps.min()) >= sep.distance \
        and res.report["specification"]["satisfied"]
    verdict(9, ok, f"targets reached = {reached}, min separation {gaps.min():.3f} >= {sep.distance}, "
                   f"obstacle hit = {hit}, monitors passed = {res.report['monitors_passed']}")


def test_criterion_10_benchmark(pendulum, scara, agents):
    t0 = time.perf_counter()
    rep = benchmark(pendulum, [scara, agents], eta=0.01, repeats=3)
    secs = time.perf_counter() - t0
    pend, sc = rep.rows[0], rep.rows[1]
    widening = sc.pair_ratio > pend.pair_ratio
    ok = pend.time_reduction >= 90 and pend.memory_reduction >= 90 and widening and secs < 300
    print(rep.to_markdown())
    verdict(10, ok, f"time -{pend.time_reduction:.2f}%, memory -{pend.memory_reduction:.2f}%, "
                    f"pair ratio pendulum {pend.pair_ratio:.0f} -> SCARA {sc.pair_ratio:.0f}, {secs:.1f} s")


def test_criterion_11_determinism(scenario_dir, tmp_path):
    diffs = []
    for name in ("pendulum.yaml", "scara.yaml"):
        scn = str(scenario_dir / name)
        for k in (1, 2):
            out = tmp_path / f"{name}-{k}"
            cli_main(["synthesize", "--scenario", scn, "--out", str(out / "syn")])
            cli_main(["simulate", "--scenario", scn, "--out", str(out / "sim"),
                      "--controller", str(out / "syn" / "controller.npz")])
        a, b = tmp_path / f"{name}-1", tmp_path / f"{name}-2"
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        diffs += [str(f) for f in files if not filecmp.cmp(a / f, b / f, shallow=False)]
    verdict(11, not diffs and len(files) >= 7, f"{len(files)} artifacts per scenario compared, differing: {diffs or 'none'}")
