"""Closed-loop simulation: symbolic VCZ motion, confinement torque, RK4 plant.

At every multiple of ``h`` the refined controller picks the VCZ velocity and
holds it, so ``xi(t)`` is piecewise linear and evaluated exactly.  Between
samples the plant is integrated with fixed-step RK4 (compiled kernel) while
the torque is re-evaluated at every stage.  Monitors run on every step and
the run halts at the first breach.
"""

from __future__ import annotations

import io
import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Union

import numpy as np

from . import _kernels
from .abstraction import InputGrid, SymbolicModel, abstract_sets, build_model
from .confinement import (
    EXACT,
    FeasibilityBounds,
    FunnelParams,
    PsiConfig,
    VczParams,
    check_feasibility,
    funnel,
    psi,
    velocity_reference,
)
from .errors import ContractViolation, OutsideDomain
from .geometry import IntervalBox, GridSpec, _vec, quantize
from .plants import DisturbanceSpec, Plant
from .specification import RasSequence, TightenedSequence, check_task_satisfaction, tighten
from .synthesis import REACH, SymbolicController, compute_delta, synthesize_sequence

log = logging.getLogger(__name__)

MONITORS = ("conf", "funnel", "torque", "vczspec")


@dataclass
class SimConfig:
    dt: Optional[float] = None
    duration: float = 10.0
    seed: int = 0


@dataclass
class InitialState:
    """``v0``/``xi0`` of ``None`` mean: ``v0 = v_r(0)`` and nearest winning center."""

    x0: np.ndarray
    v0: Optional[np.ndarray] = None
    xi0: Optional[np.ndarray] = None


@dataclass
class Scenario:
    name: str
    plant: Plant
    bounds: FeasibilityBounds
    funnel: FunnelParams
    vcz: VczParams
    seq: RasSequence
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    sim: SimConfig = field(default_factory=SimConfig)
    initial: Optional[InitialState] = None
    psi: PsiConfig = field(default_factory=PsiConfig)
    inputs_per_axis: int = 3
    # "stay", "tightened", or an explicit box.
    grid_domain: Union[str, IntervalBox] = "tightened"
    vcz_mode: str = "explicit"

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def delta(self) -> np.ndarray:
        return compute_delta(self.vcz.u_bar, self.vcz.h, self.vcz.eta).delta

    def tightened(self) -> TightenedSequence:
        return tighten(self.seq, self.vcz.lam, self.delta)

    def grid(self, tightened: Optional[TightenedSequence] = None) -> GridSpec:
        if isinstance(self.grid_domain, IntervalBox):
            dom = self.grid_domain
        elif self.grid_domain == "stay":
            dom = self.seq.tasks[0].stay
        else:
            dom = (tightened or self.tightened()).tasks[0].stay
        return GridSpec(dom, self.vcz.eta)

    def input_grid(self) -> InputGrid:
        return InputGrid(self.vcz.u_bar, self.inputs_per_axis)

    def with_eta(self, eta) -> "Scenario":
        """Copy with a different grid resolution (same radius, speed, period)."""
        e = np.broadcast_to(np.asarray(eta, dtype=float), (self.n,)).copy()
        return replace(self, vcz=VczParams(self.vcz.lam, self.vcz.u_bar, self.vcz.h, e))

    @property
    def dt(self) -> float:
        return self.sim.dt if self.sim.dt is not None else self.vcz.h / 50.0

    def feasibility(self):
        return check_feasibility(self.bounds, self.funnel, self.vcz)


@dataclass
class SynthesisResult:
    model: SymbolicModel
    controller: SymbolicController
    tightened: TightenedSequence
    seconds: float

    def stats(self) -> dict:
        out = self.controller.stats()
        out["transitions"] = self.model.n_transitions
        out["synthesis_seconds"] = self.seconds
        return out


def synthesize(scn: Scenario, model: Optional[SymbolicModel] = None) -> SynthesisResult:
    """tighten -> abstract -> solve, for the scenario's grid and inputs."""
    t0 = time.perf_counter()
    tseq = scn.tightened()
    grid = scn.grid(tseq)
    if model is None:
        model = build_model(grid, scn.input_grid(), scn.vcz.h)
    elif model.grid.shape != grid.shape or not model.grid.domain.isclose(grid.domain):
        raise ContractViolation("cached model grid does not match the scenario")
    sets = abstract_sets(tseq, model.grid)
    ctrl = synthesize_sequence(model, tseq, sets)
    return SynthesisResult(model, ctrl, tseq, time.perf_counter() - t0)


# -- trajectory --------------------------------------------------------------


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    xi: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    ev: np.ndarray
    rho: np.ndarray
    task: np.ndarray
    flags: np.ndarray  # (N, 4) bool, columns as MONITORS

    def __len__(self):
        return len(self.t)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def v_r(self) -> np.ndarray:
        return self.v - self.ev

    def record(self, k: int) -> "Record":
        return Record(self.t[k], self.x[k], self.v[k], self.xi[k], self.u[k], self.tau[k],
                      self.ev[k], self.rho[k], int(self.task[k]))

    def csv_header(self) -> str:
        n = self.n
        cols = ["t"]
        for name in ("x", "v", "xi", "u", "tau"):
            cols += [f"{name}{i + 1}" for i in range(n)]
        cols += ["task", "conf", "funnel", "torque", "vczspec"]
        return ",".join(cols)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.csv_header() + "\n")
        body = np.column_stack([self.t, self.x, self.v, self.xi, self.u, self.tau])
        ints = np.column_stack([self.task, self.flags.astype(np.int64)])
        for row, irow in zip(body, ints):
            buf.write(",".join(repr(float(c)) for c in row))
            buf.write(",")
            buf.write(",".join(str(int(c)) for c in irow))
            buf.write("\n")
        return buf.getvalue()


@dataclass
class Record:
    t: float
    x: np.ndarray
    v: np.ndarray
    xi: np.ndarray
    u: np.ndarray
    tau: np.ndarray
    ev: np.ndarray
    rho: np.ndarray
    task: int = 0


@dataclass
class MonitorContext:
    """What the monitors need: radius, torque limit, and the lambda-tightened tasks."""

    lam: float
    tau_bar: np.ndarray
    lam_seq: TightenedSequence


def monitor_arrays(ctx: MonitorContext, x, xi, tau, ev, rho, task) -> np.ndarray:
    """Vectorized monitors; returns ``(N, 4)`` flags in :data:`MONITORS` order."""
    x = np.atleast_2d(x)
    xi = np.atleast_2d(xi)
    conf = np.linalg.norm(x - xi, axis=1) < ctx.lam
    fun = np.all(np.abs(np.atleast_2d(ev)) < np.atleast_2d(rho), axis=1)
    torq = np.all(np.abs(np.atleast_2d(tau)) <= ctx.tau_bar * (1 + 1e-12), axis=1)
    spec = np.ones(len(x), dtype=bool)
    task = np.atleast_1d(task)
    for i in np.unique(task):
        sel = task == i
        tk = ctx.lam_seq.tasks[int(i)]
        pts = xi[sel]
        spec[sel] = tk.stay.contains_points(pts) & ~tk.in_obstacle(pts) & tk.separation_ok(pts)
    return np.column_stack([conf, fun, torq, spec])


def monitor_step(record: Record, ctx: MonitorContext) -> dict:
    f = monitor_arrays(ctx, record.x, record.xi, record.tau, record.ev, record.rho, record.task)[0]
    return {"confinement": bool(f[0]), "funnel": bool(f[1]), "torque": bool(f[2]), "vcz_spec": bool(f[3])}


# -- run ---------------------------------------------------------------------


def nearest_winning_center(ctrl: SymbolicController, task: int, x0) -> np.ndarray:
    centers = ctrl.grid.centers()
    win = np.flatnonzero(ctrl.tasks[task].winning)
    if not win.size:
        raise ContractViolation("empty winning domain")
    d = np.linalg.norm(centers[win] - np.asarray(x0, dtype=float), axis=1)
    return centers[win[int(np.argmin(d))]]


@dataclass
class RunResult:
    trajectory: Trajectory
    report: dict

    @property
    def ok(self) -> bool:
        return self.report["monitors_passed"] and self.report["halt"] is None


def _steps_per_sample(h: float, dt: float) -> int:
    r = int(round(h / dt))
    if r < 10:
        raise ContractViolation(f"dt = {dt} must be at most h/10 = {h / 10}")
    if abs(r * dt - h) > 1e-9 * h:
        raise ContractViolation(f"h = {h} is not a multiple of dt = {dt}")
    return r


def run(scn: Scenario, controller: Optional[SymbolicController] = None, backend=None,
        dt: Optional[float] = None, seed: Optional[int] = None) -> RunResult:
    """Simulate the closed loop and return the trajectory plus a JSON-ready report."""
    kern = backend or _kernels.kernels
    if controller is None:
        controller = synthesize(scn).controller
    n = scn.n
    lam = scn.vcz.lam
    h = scn.vcz.h
    dt = float(dt if dt is not None else scn.dt)
    r = _steps_per_sample(h, dt)
    total = int(round(scn.sim.duration / dt))
    fp = scn.funnel.broadcast(n)
    vbar, taubar = scn.bounds.v_bar, scn.bounds.tau_bar
    dist = scn.disturbance.broadcast(n)
    # The scenario seed drives the only random component, the disturbance.
    dist.seed = int(scn.sim.seed if seed is None else seed)
    dist.hold = dt
    ctx = MonitorContext(lam, taubar, tighten(scn.seq, lam, 0.0))

    init = scn.initial or InitialState(np.zeros(n))
    x0 = _vec(init.x0, n, name="x0")
    xi_choice = "given"
    if init.xi0 is None:
        xi0 = nearest_winning_center(controller, 0, x0)
        xi_choice = "nearest winning cell center"
    else:
        xi0 = _vec(init.xi0, n, name="xi0")
    if not np.linalg.norm(x0 - xi0) < lam:
        raise ContractViolation(f"|x0 - xi0| = {np.linalg.norm(x0 - xi0):.4g} is not below lambda = {lam}")
    vr0 = velocity_reference(x0, xi0, lam, vbar, scn.psi)
    v0 = vr0.copy() if init.v0 is None else _vec(init.v0, n, name="v0")
    if not np.all(np.abs(v0 - vr0) < fp.p_v):
        raise ContractViolation("initial velocity error is outside the funnel")

    policies = [controller.refine(i) for i in range(len(controller))]
    tasks = controller.tasks
    if not policies[0].contains(xi0):
        raise ContractViolation(f"xi0 = {xi0.tolist()} is outside the task-0 winning domain")

    T = np.arange(total + 1) * dt
    X = np.empty((total + 1, n))
    V = np.empty((total + 1, n))
    XI = np.empty((total + 1, n))
    U = np.zeros((total + 1, n))
    TAU = np.empty((total + 1, n))
    EV = np.empty((total + 1, n))
    RHO = np.empty((total + 1, n))
    TASK = np.zeros(total + 1, dtype=np.int64)
    FLAGS = np.zeros((total + 1, 4), dtype=bool)

    X[0], V[0], XI[0] = x0, v0, xi0
    RHO[0] = funnel(0.0, fp)
    EV[0] = v0 - vr0
    TAU[0] = -taubar * psi(EV[0] / RHO[0], scn.psi)

    active = 0
    reached_at = {}
    halt = None
    first_fail = None
    step = 0
    FLAGS[0] = monitor_arrays(ctx, X[:1], XI[:1], TAU[:1], EV[:1], RHO[:1], TASK[:1])[0]
    if not FLAGS[0].all():
        first_fail = 0
        total = 0
    x, v, xi = x0.copy(), v0.copy(), xi0.copy()
    done = False
    n_tasks = len(tasks)
    while step < total:
        # Sampling instant: switch tasks, then pick the input.
        if not done and tasks[active].kind == REACH:
            flat = controller.grid.flat(quantize(xi, controller.grid))
            while flat >= 0 and tasks[active].kind == REACH and tasks[active].goal[flat]:
                reached_at[active] = float(T[step])
                if active + 1 < n_tasks:
                    active += 1
                else:
                    done = True
                    break
        if done:
            u = np.zeros(n)
        else:
            try:
                u = policies[active](xi)
            except OutsideDomain as exc:
                halt = {"reason": "outside_domain", "step": step, "cell": str(exc.cell), "message": str(exc)}
                break
        U[step] = u
        TASK[step] = active
        steps = min(r, total - step)
        dvals = dist.window_values(step, steps) if dist.kind_id == 2 else np.zeros((0, n))
        xs, vs, taus, evs, rhos = kern.integrate_segment(
            scn.plant.kernel_id, scn.plant.param_vector, x, v, xi, u, step, 0.0, dt, steps,
            lam, vbar, taubar, fp.p_v, fp.q_v, fp.mu_v, scn.psi.a, int(scn.psi.variant == EXACT),
            dist.kind_id, dist.amplitude, dist.frequency, dist.phase, dvals,
        )
        sl = slice(step + 1, step + steps + 1)
        X[sl], V[sl], TAU[sl], EV[sl], RHO[sl] = xs, vs, taus, evs, rhos
        XI[sl] = xi + u * (np.arange(1, steps + 1)[:, None] * dt)
        U[sl] = u
        TASK[sl] = active
        FLAGS[sl] = monitor_arrays(ctx, xs, XI[sl], taus, evs, rhos, TASK[sl])
        bad = np.flatnonzero(~FLAGS[sl].all(axis=1))
        if bad.size:
            first_fail = step + 1 + int(bad[0])
            step = first_fail
            break
        x, v = xs[-1].copy(), vs[-1].copy()
        xi = XI[step + steps].copy()
        step += steps

    N = step + 1
    flags = FLAGS[:N]
    if first_fail is not None:
        which = [MONITORS[j] for j in range(4) if not flags[-1, j]]
        halt = {"reason": "monitor_breach", "step": first_fail, "monitors": which, "t": float(T[first_fail])}
    traj = Trajectory(T[:N], X[:N], V[:N], XI[:N], U[:N], TAU[:N], EV[:N], RHO[:N], TASK[:N], flags)
    # Reach verdict for the final sample instant after the loop.
    if halt is None and not done and tasks[active].kind == REACH:
        flat = controller.grid.flat(quantize(xi, controller.grid))
        if flat >= 0 and tasks[active].goal[flat]:
            reached_at[active] = float(T[N - 1])
            if active + 1 == n_tasks:
                done = True
    sat = check_task_satisfaction(traj.x, scn.seq)
    report = {
        "scenario": scn.name,
        "kernel_backend": kern.BACKEND,
        "dt": dt,
        "steps": int(N - 1),
        "xi0": xi0.tolist(),
        "xi0_rule": xi_choice,
        "v0": v0.tolist(),
        "halt": halt,
        "first_failure_index": first_fail,
        "monitor_pass_counts": {m: int(flags[:, j].sum()) for j, m in enumerate(MONITORS)},
        "monitors_passed": bool(first_fail is None),
        "tasks_reached_at": {str(k): v for k, v in sorted(reached_at.items())},
        "all_tasks_completed": bool(done or all(t.kind != REACH for t in tasks)),
        "max_distance_ratio": float(np.max(np.linalg.norm(traj.x - traj.xi, axis=1)) / lam),
        "max_funnel_ratio": float(np.max(np.abs(traj.ev) / traj.rho)),
        "max_torque_ratio": float(np.max(np.abs(traj.tau) / taubar)),
        "specification": sat.as_dict(),
    }
    return RunResult(traj, report)


def plot_data(traj: Trajectory) -> dict:
    """Per-figure series: configuration and center, velocities and VCZ input, torques."""
    def table(cols, names):
        buf = io.StringIO()
        buf.write(",".join(names) + "\n")
        for row in np.column_stack(cols):
            buf.write(",".join(repr(float(c)) for c in row) + "\n")
        return buf.getvalue()

    n = traj.n
    idx = [str(i + 1) for i in range(n)]
    return {
        "configuration.csv": table([traj.t, traj.x, traj.xi], ["t"] + [f"x{i}" for i in idx] + [f"xi{i}" for i in idx]),
        "velocity.csv": table([traj.t, traj.v, traj.u, traj.ev, traj.rho],
                              ["t"] + [f"v{i}" for i in idx] + [f"u{i}" for i in idx]
                              + [f"ev{i}" for i in idx] + [f"rho{i}" for i in idx]),
        "torque.csv": table([traj.t, traj.tau], ["t"] + [f"tau{i}" for i in idx]),
    }
