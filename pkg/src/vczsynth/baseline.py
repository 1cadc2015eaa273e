"""Full-state symbolic baseline and the VCZ-vs-baseline benchmark.

The baseline abstracts the known pendulum model over (angle, velocity) with
a growth-bound over-approximation: the cell center is propagated for one
sampling period and the image is inflated by ``exp(L h)`` applied to the
cell radius.  It deliberately uses the exact model; it is the comparator,
not part of the model-free pipeline.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .abstraction import CsrModel, FrrReport, InputGrid, SymbolicModel
from .errors import ContractViolation
from .geometry import GridSpec, IntervalBox, cells_intersecting_many, quantize_many
from .plants import Plant
from .synthesis import solve_invariance

# One transition record = (pair index, successor index), both int64.
RECORD_BYTES = 16


@dataclass(frozen=True)
class GrowthBound:
    """Interval growth of the pendulum flow ``x' = v, v' = a tau - b sin x + a d``.

    The Jacobian is bounded componentwise by ``L = [[0, 1], [b, 0]]``, so
    trajectories from a box of radius ``r0`` stay within ``exp(L h) r0`` of
    the center trajectory, plus the disturbance term ``int_0^h exp(L s) ds``
    applied to ``(0, a d_bar)``.
    """

    a: float
    b: float
    h: float

    @classmethod
    def for_plant(cls, plant: Plant, h: float) -> "GrowthBound":
        if plant.name != "pendulum":
            raise ContractViolation("the full-state baseline covers the pendulum only")
        m, l, g = plant.params["m"], plant.params["l"], plant.params["g"]
        return cls(3.0 / (m * l * l), 1.5 * g / l, float(h))

    def expansion(self) -> np.ndarray:
        w = math.sqrt(self.b)
        ch, sh = math.cosh(w * self.h), math.sinh(w * self.h)
        return np.array([[ch, sh / w], [w * sh, ch]])

    def integral(self) -> np.ndarray:
        w = math.sqrt(self.b)
        ch, sh = math.cosh(w * self.h), math.sinh(w * self.h)
        return np.array([[sh / w, (ch - 1.0) / self.b], [ch - 1.0, sh / w]])

    def radius(self, r0, d_bar: float = 0.0) -> np.ndarray:
        r0 = np.asarray(r0, dtype=float)
        return self.expansion() @ r0 + self.integral() @ np.array([0.0, self.a * d_bar])


def pendulum_flow(x, v, tau, gb: GrowthBound, d=0.0, substeps: int = 10):
    """RK4 over one period with constant torque and disturbance (vectorized)."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    drive = gb.a * (np.asarray(tau, dtype=float) + d)
    dt = gb.h / substeps

    def f(x, v):
        return v, drive - gb.b * np.sin(x)

    for _ in range(substeps):
        k1x, k1v = f(x, v)
        k2x, k2v = f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = f(x + dt * k3x, v + dt * k3v)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return x, v


def build_fullstate_model(plant: Plant, grid: GridSpec, torques: InputGrid, h: float,
                          d_bar: float = 0.0, substeps: int = 10) -> CsrModel:
    """Growth-bound abstraction of the pendulum over an (angle, velocity) grid.

    Pairs whose over-approximated image leaves the grid get no successors
    (the input is blocked there).
    """
    if grid.dim != 2 or torques.dim != 1:
        raise ContractViolation("full-state pendulum grid must be 2-D with scalar torque")
    gb = GrowthBound.for_plant(plant, h)
    n_cells, m = grid.n_cells, torques.size
    idx = np.stack(np.unravel_index(np.arange(n_cells), grid.shape), axis=1)
    centers = grid.lo + (idx + 0.5) * grid.eta
    # pair p = cell * m + u
    cx = np.repeat(centers[:, 0], m)
    cv = np.repeat(centers[:, 1], m)
    tau = np.tile(torques.values[:, 0], n_cells)
    px, pv = pendulum_flow(cx, cv, tau, gb, substeps=substeps)
    # small slack for the center integration error
    r = gb.radius(grid.eta / 2.0, d_bar) + 1e-9 * grid.eta
    img = np.stack([px, pv], axis=1)
    first, last, inside = cells_intersecting_many(img - r, img + r, grid)
    counts = np.where(inside[:, None], last - first + 1, 0)

    pair_ids, succ = [], []
    for off in itertools.product(*[range(int(c)) for c in counts.max(axis=0)]):
        off = np.asarray(off)
        sel = np.flatnonzero(np.all(counts > off, axis=1))
        pair_ids.append(sel)
        succ.append(np.ravel_multi_index(tuple((first[sel] + off).T), grid.shape))
    pair_ids = np.concatenate(pair_ids) if pair_ids else np.zeros(0, dtype=np.int64)
    succ = np.concatenate(succ) if succ else np.zeros(0, dtype=np.int64)
    order = np.lexsort((succ, pair_ids))
    indptr = np.zeros(n_cells * m + 1, dtype=np.int64)
    np.cumsum(np.bincount(pair_ids, minlength=n_cells * m), out=indptr[1:])
    return CsrModel(grid, torques, float(h), indptr, succ[order])


def audit_fullstate(model: CsrModel, plant: Plant, trials: int = 10_000, seed: int = 0,
                    d_bar: float = 0.0, substeps: int = 40, max_report: int = 20) -> FrrReport:
    """Sampled soundness: the simulated successor cell must be in Post."""
    gb = GrowthBound.for_plant(plant, model.h)
    rng = np.random.default_rng(seed)
    cov = model.grid.covered
    s = rng.uniform(cov.lo, cov.hi, size=(trials, 2))
    u = rng.integers(0, model.n_inputs, size=trials)
    d = rng.uniform(-d_bar, d_bar, size=trials) if d_bar > 0 else 0.0
    x1, v1 = pendulum_flow(s[:, 0], s[:, 1], model.inputs.values[u, 0], gb, d, substeps)
    c = quantize_many(s, model.grid)
    c2 = quantize_many(np.stack([x1, v1], axis=1), model.grid)
    enabled, member = model.has_transitions(c, u, c2)
    bad = np.flatnonzero(enabled & ~member)
    grid = model.grid
    witnesses = [(grid.unflat(int(c[k])), int(u[k]), grid.unflat(int(c2[k]))) for k in bad[:max_report]]
    return FrrReport(bad.size == 0, trials, int(enabled.sum()), witnesses, int(bad.size))


# -- benchmark ---------------------------------------------------------------


@dataclass
class Measurement:
    """One synthesis run: wall time, stored transitions, winning domain size."""

    seconds: float
    transitions: int
    domain: int
    cells: int
    pairs: int

    @property
    def memory_kb(self) -> float:
        return self.transitions * RECORD_BYTES / 1000.0


def reduction(baseline: float, new: float) -> float:
    """Percent reduction of ``new`` relative to ``baseline``."""
    if baseline <= 0:
        raise ContractViolation("baseline quantity must be positive")
    return 100.0 * (baseline - new) / baseline


@dataclass
class BenchRow:
    case: str
    state_dim: int
    vcz: Measurement
    baseline: Optional[Measurement] = None
    note: str = ""
    # grid-arithmetic size of the full-state abstraction when it is not run
    est_baseline_pairs: Optional[int] = None

    @property
    def time_reduction(self) -> Optional[float]:
        return None if self.baseline is None else reduction(self.baseline.seconds, self.vcz.seconds)

    @property
    def memory_reduction(self) -> Optional[float]:
        return None if self.baseline is None else reduction(self.baseline.memory_kb, self.vcz.memory_kb)

    @property
    def pair_ratio(self) -> Optional[float]:
        """Full-state (cell, input) pairs per VCZ pair, measured or estimated."""
        base = self.baseline.pairs if self.baseline is not None else self.est_baseline_pairs
        return None if base is None else base / self.vcz.pairs

    def as_dict(self) -> dict:
        def meas(mm):
            return None if mm is None else {
                "seconds": mm.seconds, "transitions": mm.transitions, "memory_kb": mm.memory_kb,
                "domain": mm.domain, "cells": mm.cells, "pairs": mm.pairs,
            }
        return {
            "case": self.case, "state_dim": self.state_dim, "vcz": meas(self.vcz),
            "baseline": meas(self.baseline), "time_reduction_pct": self.time_reduction,
            "memory_reduction_pct": self.memory_reduction, "pair_ratio": self.pair_ratio,
            "est_baseline_pairs": self.est_baseline_pairs, "note": self.note,
        }


@dataclass
class BenchmarkReport:
    rows: List[BenchRow] = field(default_factory=list)

    COLUMNS = ("case", "base_time_s", "vcz_time_s", "time_red_pct", "base_mem_kb", "vcz_mem_kb",
               "mem_red_pct", "base_domain", "vcz_domain", "pair_ratio", "note")

    def _cells(self, row: BenchRow) -> list:
        b = row.baseline

        def num(v, fmt):
            return "-" if v is None else format(v, fmt)

        return [
            f"{row.case} ({row.state_dim} dimensions)",
            num(None if b is None else b.seconds, ".4f"), num(row.vcz.seconds, ".4f"), num(row.time_reduction, ".2f"),
            num(None if b is None else b.memory_kb, ".2f"), num(row.vcz.memory_kb, ".2f"), num(row.memory_reduction, ".2f"),
            num(None if b is None else b.domain, "d"), num(row.vcz.domain, "d"),
            num(row.pair_ratio, ".1f"), row.note,
        ]

    def to_markdown(self) -> str:
        head = ["Case study", "Baseline time (s)", "VCZ time (s)", "% Red.", "Baseline mem (kB)",
                "VCZ mem (kB)", "% Red.", "Baseline domain", "VCZ domain", "Pair ratio", "Note"]
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        lines += ["| " + " | ".join(self._cells(r)) + " |" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.rows:
            w.writerow(self._cells(r))
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {"record_bytes": RECORD_BYTES, "rows": [r.as_dict() for r in self.rows]}


def _best_time(fn: Callable[[], object], repeats: int):
    best, out = math.inf, None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def measure_vcz(scn, repeats: int = 3) -> Measurement:
    from .sim import synthesize

    secs, res = _best_time(lambda: synthesize(scn), repeats)
    model: SymbolicModel = res.model
    domain = int(res.controller.tasks[0].winning.sum())
    return Measurement(secs, model.n_transitions, domain, model.n_cells, model.n_cells * model.n_inputs)


def pendulum_baseline_grid(scn, eta=None) -> GridSpec:
    """(angle, velocity) grid over the stay interval and ``[-v_bar, v_bar]``."""
    stay = scn.seq.tasks[0].stay
    vb = float(scn.bounds.v_bar[0])
    e = float(np.max(scn.vcz.eta)) if eta is None else float(eta)
    box = IntervalBox([stay.lo[0], -vb], [stay.hi[0], vb])
    return GridSpec(box, np.array([e, e]))


def measure_baseline(scn, eta=None, torque_samples: int = 21, repeats: int = 3) -> Measurement:
    """Full-state pendulum synthesis of the invariance task over the whole grid."""
    grid = pendulum_baseline_grid(scn, eta)
    torques = InputGrid(scn.bounds.tau_bar[:1], torque_samples)

    def job():
        model = build_fullstate_model(scn.plant, grid, torques, scn.vcz.h)
        return model, solve_invariance(model, np.ones(grid.n_cells, dtype=bool))

    secs, (model, task) = _best_time(job, repeats)
    return Measurement(secs, model.n_transitions, int(task.winning.sum()), model.n_cells,
                       model.n_cells * model.n_inputs)


def estimate_fullstate_pairs(scn, torque_samples: int = 21, eta=None) -> int:
    """Grid arithmetic for a full-state abstraction at the VCZ resolution:
    configuration axes over the stay set, velocity axes over ``[-v_bar, v_bar]``."""
    stay = scn.seq.tasks[0].stay
    e = np.broadcast_to(np.asarray(scn.vcz.eta if eta is None else eta, dtype=float), (scn.n,))
    conf = np.ceil(stay.width / e - 1e-9)
    vel = np.ceil(2.0 * scn.bounds.v_bar / e - 1e-9)
    return int(np.prod(conf) * np.prod(vel) * torque_samples ** scn.n)


def benchmark(pendulum_scn, others=(), eta=None, torque_samples: int = 21, repeats: int = 3) -> BenchmarkReport:
    """Pendulum VCZ vs full-state baseline, plus VCZ-only rows for ``others``.

    ``eta`` overrides the pendulum VCZ resolution so both sides use the same
    cell width.
    """
    scn = pendulum_scn if eta is None else pendulum_scn.with_eta(eta)
    vcz = measure_vcz(scn, repeats)
    base = measure_baseline(scn, eta, torque_samples, repeats)
    rows = [BenchRow("Pendulum", 2 * scn.n, vcz, base)]
    for other in others:
        rows.append(BenchRow(
            other.name, 2 * other.n, measure_vcz(other, repeats),
            note="baseline not run (full-state abstraction out of desk scale)",
            est_baseline_pairs=estimate_fullstate_pairs(other, torque_samples),
        ))
    return BenchmarkReport(rows)


__all__ = [
    "RECORD_BYTES",
    "GrowthBound",
    "pendulum_flow",
    "build_fullstate_model",
    "audit_fullstate",
    "Measurement",
    "reduction",
    "BenchRow",
    "BenchmarkReport",
    "measure_vcz",
    "measure_baseline",
    "estimate_fullstate_pairs",
    "benchmark",
]
