"""Finite symbolic model of the VCZ single integrator on a uniform grid.

Two representations share one interface:

* :class:`IntegratorModel` stores Post implicitly.  For ``xi' = u`` the
  reach box of a cell is the cell shifted by ``h u``, so the successor set is
  a per-axis offset range that does not depend on the cell, plus a per-axis
  range of cells whose reach box stays inside the grid.
* :class:`CsrModel` stores explicit sorted successor lists in CSR form; used
  for the full-state baseline, mutated models, and model dumps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .artifacts import read_npz, write_npz
from .errors import AbstractGoalEmpty, ContractViolation, DegenerateHorizon
from .geometry import GRID_EPS, OVERFLOW, GridSpec, IntervalBox, _vec, quantize_many


@dataclass(frozen=True, eq=False)
class InputGrid:
    """Odd number of evenly spaced samples per axis on ``[-bound, bound]``.

    Inputs are ordered by the largest normalized component, then the sum of
    normalized magnitudes, then lexicographically, so index 0 is always the
    zero input and low indices are the gentlest moves.
    """

    bound: np.ndarray
    samples_per_axis: np.ndarray = 3

    def __post_init__(self):
        b = _vec(self.bound, name="bound")
        if np.any(b <= 0):
            raise ContractViolation("input bound must be positive")
        k = np.atleast_1d(np.asarray(self.samples_per_axis))
        if k.size == 1:
            k = np.full(b.size, int(k[0]))
        if k.size != b.size or np.any(k < 3) or np.any(k % 2 == 0):
            raise ContractViolation("samples_per_axis must be odd and >= 3 (extremes and 0)")
        b.setflags(write=False)
        object.__setattr__(self, "bound", b)
        object.__setattr__(self, "samples_per_axis", k.astype(np.int64))
        half = (k - 1) // 2
        steps = np.array(
            list(itertools.product(*[range(-hk, hk + 1) for hk in half])), dtype=np.int64
        ).reshape(-1, b.size)
        norm = np.abs(steps) / half
        order = np.lexsort(tuple(steps.T[::-1]) + (norm.sum(axis=1), norm.max(axis=1)))
        steps = steps[order]
        values = steps / half * b
        values.setflags(write=False)
        object.__setattr__(self, "_steps", steps)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.bound.size

    @property
    def size(self) -> int:
        return len(self.values)

    def __len__(self):
        return self.size

    def __getitem__(self, index) -> np.ndarray:
        return self.values[index]

    def index_of(self, u) -> int:
        u = _vec(u, self.dim)
        hit = np.flatnonzero(np.all(np.isclose(self.values, u, rtol=0, atol=1e-12), axis=1))
        if not hit.size:
            raise ContractViolation(f"{u} is not a sampled input")
        return int(hit[0])


class SymbolicModel:
    """Common interface: ``post(cell, input) -> sorted flat successor indices``."""

    grid: GridSpec
    inputs: InputGrid
    h: float

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def n_inputs(self) -> int:
        return self.inputs.size

    @property
    def tightened_domain(self) -> np.ndarray:
        """Flat indices of cells whose box lies inside the grid domain."""
        return np.flatnonzero(boxes_inside(self.grid, self.grid.domain))

    def post(self, cell: int, u: int) -> np.ndarray:
        raise NotImplementedError

    def post_cells(self, cell, u: int) -> list:
        """Successors as multi-indices; ``cell`` may be a multi-index."""
        if cell is OVERFLOW:
            return []
        flat = cell if isinstance(cell, (int, np.integer)) else self.grid.flat(cell)
        return [self.grid.unflat(int(c)) for c in self.post(int(flat), u)]

    def post_counts(self) -> np.ndarray:
        """``(n_cells, n_inputs)`` successor counts; 0 marks blocked pairs."""
        raise NotImplementedError

    @property
    def n_transitions(self) -> int:
        return int(self.post_counts().sum())

    def has_transitions(self, cells, inputs, succs):
        """Vectorized: (pair enabled, ``succ`` in Post(cell, input))."""
        raise NotImplementedError

    def to_csr(self) -> "CsrModel":
        raise NotImplementedError


@dataclass(eq=False)
class IntegratorModel(SymbolicModel):
    grid: GridSpec
    inputs: InputGrid
    h: float
    # (m, n) inclusive successor offsets and (m, n) inclusive valid cell ranges.
    off_lo: np.ndarray = field(repr=False, default=None)
    off_hi: np.ndarray = field(repr=False, default=None)
    valid_lo: np.ndarray = field(repr=False, default=None)
    valid_hi: np.ndarray = field(repr=False, default=None)

    def axis_valid(self, u: int, axis: int) -> np.ndarray:
        k = np.arange(self.grid.shape[axis])
        return (k >= self.valid_lo[u, axis]) & (k <= self.valid_hi[u, axis])

    def valid_mask(self, u: int) -> np.ndarray:
        """Grid-shaped mask of cells where input ``u`` has a non-empty Post."""
        out = np.ones(self.grid.shape, dtype=bool)
        for i in range(self.grid.dim):
            shape = [1] * self.grid.dim
            shape[i] = self.grid.shape[i]
            out = out & self.axis_valid(u, i).reshape(shape)
        return out

    def post(self, cell: int, u: int) -> np.ndarray:
        idx = np.unravel_index(int(cell), self.grid.shape)
        lo = self.valid_lo[u]
        hi = self.valid_hi[u]
        if any(k < a or k > b for k, a, b in zip(idx, lo, hi)):
            return np.empty(0, dtype=np.int64)
        ranges = [
            np.arange(k + a, k + b + 1)
            for k, a, b in zip(idx, self.off_lo[u], self.off_hi[u])
        ]
        mesh = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index(tuple(m.ravel() for m in mesh), self.grid.shape).astype(np.int64)

    def post_counts(self) -> np.ndarray:
        per = np.prod(self.off_hi - self.off_lo + 1, axis=1)
        return np.stack([self.valid_mask(u).ravel() * per[u] for u in range(self.n_inputs)], axis=1)

    @property
    def n_transitions(self) -> int:
        per = np.prod(self.off_hi - self.off_lo + 1, axis=1)
        total = 0
        for u in range(self.n_inputs):
            span = np.clip(self.valid_hi[u] - self.valid_lo[u] + 1, 0, None)
            total += int(np.prod(span)) * int(per[u])
        return total

    def has_transitions(self, cells, inputs, succs):
        cells = np.asarray(cells, dtype=np.int64)
        inputs = np.asarray(inputs, dtype=np.int64)
        succs = np.asarray(succs, dtype=np.int64)
        ok_c = cells >= 0
        c = np.stack(np.unravel_index(np.where(ok_c, cells, 0), self.grid.shape), axis=1)
        enabled = ok_c & np.all((c >= self.valid_lo[inputs]) & (c <= self.valid_hi[inputs]), axis=1)
        ok_s = succs >= 0
        s = np.stack(np.unravel_index(np.where(ok_s, succs, 0), self.grid.shape), axis=1)
        d = s - c
        member = ok_s & np.all((d >= self.off_lo[inputs]) & (d <= self.off_hi[inputs]), axis=1)
        return enabled, enabled & member

    def to_csr(self) -> "CsrModel":
        n_cells, m = self.n_cells, self.n_inputs
        counts = self.post_counts().ravel()
        indptr = np.zeros(n_cells * m + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        for u in range(m):
            cells = np.flatnonzero(self.valid_mask(u).ravel())
            if not cells.size:
                continue
            base = np.stack(np.unravel_index(cells, self.grid.shape), axis=1)
            offs = np.array(
                list(itertools.product(*[range(a, b + 1) for a, b in zip(self.off_lo[u], self.off_hi[u])]))
            )
            succ = base[:, None, :] + offs[None, :, :]
            flat = np.ravel_multi_index(tuple(np.moveaxis(succ, 2, 0)), self.grid.shape)
            start = indptr[cells * m + u]
            pos = start[:, None] + np.arange(len(offs))[None, :]
            indices[pos.ravel()] = flat.ravel()
        return CsrModel(self.grid, self.inputs, self.h, indptr, indices)


@dataclass(eq=False)
class CsrModel(SymbolicModel):
    """Explicit model; pair ``p = cell * n_inputs + input`` owns
    ``indices[indptr[p]:indptr[p+1]]`` (sorted, deduplicated)."""

    grid: GridSpec
    inputs: InputGrid
    h: float
    indptr: np.ndarray = field(repr=False, default=None)
    indices: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indptr.size != self.n_cells * self.n_inputs + 1:
            raise ContractViolation("indptr length does not match cells x inputs")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n_cells):
            raise ContractViolation("successor index outside the grid")
        self._keys = None

    def post(self, cell: int, u: int) -> np.ndarray:
        p = int(cell) * self.n_inputs + int(u)
        return self.indices[self.indptr[p] : self.indptr[p + 1]]

    def post_counts(self) -> np.ndarray:
        return np.diff(self.indptr).reshape(self.n_cells, self.n_inputs)

    @property
    def n_transitions(self) -> int:
        return int(self.indices.size)

    def _pair_keys(self) -> np.ndarray:
        if self._keys is None:
            pairs = np.repeat(np.arange(self.n_cells * self.n_inputs, dtype=np.int64), np.diff(self.indptr))
            self._keys = pairs * self.n_cells + self.indices
        return self._keys

    def has_transitions(self, cells, inputs, succs):
        cells = np.asarray(cells, dtype=np.int64)
        inputs = np.asarray(inputs, dtype=np.int64)
        succs = np.asarray(succs, dtype=np.int64)
        ok = cells >= 0
        p = np.where(ok, cells, 0) * self.n_inputs + inputs
        enabled = ok & (self.indptr[p + 1] > self.indptr[p])
        keys = self._pair_keys()
        q = p * self.n_cells + np.where(succs >= 0, succs, 0)
        pos = np.searchsorted(keys, q)
        found = (pos < keys.size) & (keys[np.minimum(pos, keys.size - 1)] == q) & (succs >= 0)
        return enabled, enabled & found

    def to_csr(self) -> "CsrModel":
        return self

    def without_transition(self, cell: int, u: int, succ: int) -> "CsrModel":
        """Copy with one successor removed (for mutation checks)."""
        p = int(cell) * self.n_inputs + int(u)
        row = self.post(cell, u)
        hit = np.flatnonzero(row == succ)
        if not hit.size:
            raise ContractViolation(f"{succ} is not a successor of ({cell}, {u})")
        k = int(self.indptr[p] + hit[0])
        indices = np.delete(self.indices, k)
        indptr = self.indptr.copy()
        indptr[p + 1 :] -= 1
        return CsrModel(self.grid, self.inputs, self.h, indptr, indices)


def _axis_offsets(shift: float):
    """Offset range of cells overlapping ``[k + shift, k + 1 + shift]`` (cell units)."""
    first = math.floor(shift + GRID_EPS)
    last = math.ceil(1.0 + shift - GRID_EPS) - 1
    return first, max(first, last)


def build_model(grid: GridSpec, inputs: InputGrid, h: float) -> IntegratorModel:
    """Symbolic model of ``xi' = u`` sampled with period ``h``.

    Post(cell, u) is every cell overlapping the cell shifted by ``h u``; the
    pair is blocked when the shifted box leaves the covered domain.
    """
    if not h > 0:
        raise ContractViolation("sampling period h must be positive")
    if inputs.dim != grid.dim:
        raise ContractViolation("input and grid dimensions differ")
    width = grid.domain.width
    if np.any(h * inputs.bound >= width):
        raise DegenerateHorizon(
            f"h * u_bar = {(h * inputs.bound).tolist()} spans the domain width {width.tolist()}"
        )
    m, n = inputs.size, grid.dim
    off_lo = np.empty((m, n), dtype=np.int64)
    off_hi = np.empty((m, n), dtype=np.int64)
    valid_lo = np.empty((m, n), dtype=np.int64)
    valid_hi = np.empty((m, n), dtype=np.int64)
    for u in range(m):
        for i in range(n):
            s = h * inputs.values[u, i] / grid.eta[i]
            off_lo[u, i], off_hi[u, i] = _axis_offsets(s)
            # Reach box [k+s, k+1+s] must lie inside [0, shape].
            valid_lo[u, i] = max(0, math.ceil(-s - GRID_EPS))
            valid_hi[u, i] = min(grid.shape[i] - 1, math.floor(grid.shape[i] - 1 - s + GRID_EPS))
    return IntegratorModel(grid, inputs, float(h), off_lo, off_hi, valid_lo, valid_hi)


# -- abstract sets ---------------------------------------------------------


def _axis_faces(grid: GridSpec, i: int):
    k = np.arange(grid.shape[i], dtype=float)
    lo = grid.lo[i] + k * grid.eta[i]
    return lo, lo + grid.eta[i]


def _outer_and(grid: GridSpec, masks) -> np.ndarray:
    out = np.ones(grid.shape, dtype=bool)
    for i, mk in enumerate(masks):
        shape = [1] * grid.dim
        shape[i] = grid.shape[i]
        out = out & mk.reshape(shape)
    return out.ravel()


def boxes_inside(grid: GridSpec, box: IntervalBox, tol: float = 1e-9) -> np.ndarray:
    """Flat mask of cells whose closed box is contained in ``box``.

    ``tol`` is relative to ``eta`` and only absorbs rounding of aligned faces.
    """
    if box.empty:
        return np.zeros(grid.n_cells, dtype=bool)
    masks = []
    for i in range(grid.dim):
        lo, hi = _axis_faces(grid, i)
        t = tol * grid.eta[i]
        masks.append((lo >= box.lo[i] - t) & (hi <= box.hi[i] + t))
    return _outer_and(grid, masks)


def boxes_meeting(grid: GridSpec, box: IntervalBox) -> np.ndarray:
    """Flat mask of cells whose closed box intersects ``box`` (touching counts)."""
    if box.empty:
        return np.zeros(grid.n_cells, dtype=bool)
    masks = []
    for i in range(grid.dim):
        lo, hi = _axis_faces(grid, i)
        masks.append((lo <= box.hi[i]) & (hi >= box.lo[i]))
    return _outer_and(grid, masks)


def separation_unsafe(grid: GridSpec, sep) -> np.ndarray:
    """Cells where some point pair of the two axis groups is closer than ``distance``."""
    gap2 = np.zeros(grid.shape)
    for a, b in zip(sep.axes_a, sep.axes_b):
        lo_a, hi_a = _axis_faces(grid, a)
        lo_b, hi_b = _axis_faces(grid, b)
        g = np.maximum(0.0, np.maximum(lo_a[:, None] - hi_b[None, :], lo_b[None, :] - hi_a[:, None]))
        if a > b:
            g = g.T
        shape = [1] * grid.dim
        shape[a] = grid.shape[a]
        shape[b] = grid.shape[b]
        gap2 = gap2 + (g**2).reshape(shape)
    return (np.sqrt(gap2) <= sep.distance).ravel()


@dataclass
class AbstractSets:
    """Flat boolean masks over grid cells for one task."""

    goal: np.ndarray
    unsafe: np.ndarray
    stay: np.ndarray

    @property
    def is_invariance(self) -> bool:
        return not self.goal.any()


def abstract_sets(seq, grid: GridSpec) -> List[AbstractSets]:
    """Goal (cells inside), obstacle (cells meeting), stay (cells inside) per task."""
    tasks = seq.tasks
    if tasks and not grid.covered.contains_box(tasks[0].stay, tol=1e-9):
        raise ContractViolation("grid does not cover the tightened stay set")
    out = []
    for i, task in enumerate(tasks):
        stay = boxes_inside(grid, task.stay)
        unsafe = np.zeros(grid.n_cells, dtype=bool)
        for o in task.obstacles:
            unsafe |= boxes_meeting(grid, o)
        for sep in task.separations:
            unsafe |= separation_unsafe(grid, sep)
        goal = np.zeros(grid.n_cells, dtype=bool)
        for g in task.goal:
            goal |= boxes_inside(grid, g)
        if not task.is_invariance and not goal.any():
            raise AbstractGoalEmpty(
                f"task {i}: no cell of width {grid.eta.tolist()} fits inside the tightened goal; "
                "use a finer eta"
            )
        out.append(AbstractSets(goal, unsafe, stay))
    return out


# -- FRR check ---------------------------------------------------------------


@dataclass
class FrrReport:
    passed: bool
    trials: int
    checked: int
    counterexamples: list
    n_counterexamples: int

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "trials": self.trials,
            "checked": self.checked,
            "n_counterexamples": self.n_counterexamples,
            "counterexamples": self.counterexamples,
        }


def check_frr(model: SymbolicModel, h: Optional[float] = None, trials: int = 100_000, seed: int = 0,
              max_report: int = 20) -> FrrReport:
    """Sample concrete ``x`` and inputs; check ``Q(x + h u) in Post(Q(x), u)``.

    Counterexamples are ``(cell, input, successor)`` with multi-index cells.
    """
    if trials < 1:
        raise ContractViolation("trials must be >= 1")
    h = model.h if h is None else float(h)
    grid = model.grid
    rng = np.random.default_rng(seed)
    cov = grid.covered
    x = rng.uniform(cov.lo, cov.hi, size=(trials, grid.dim))
    u = rng.integers(0, model.n_inputs, size=trials)
    c = quantize_many(x, grid)
    c2 = quantize_many(x + h * model.inputs.values[u], grid)
    enabled, member = model.has_transitions(c, u, c2)
    bad = np.flatnonzero(enabled & ~member)
    witnesses = []
    seen = set()
    for k in bad:
        key = (int(c[k]), int(u[k]), int(c2[k]))
        if key in seen:
            continue
        seen.add(key)
        witnesses.append((grid.unflat(key[0]), key[1], grid.unflat(key[2])))
        if len(witnesses) >= max_report:
            break
    return FrrReport(bad.size == 0, trials, int(enabled.sum()), witnesses, int(bad.size))


# -- dumps -------------------------------------------------------------------


def _grid_arrays(model: SymbolicModel) -> dict:
    return {
        "grid_lo": model.grid.domain.lo,
        "grid_hi": model.grid.domain.hi,
        "grid_eta": model.grid.eta,
        "input_bound": model.inputs.bound,
        "input_samples": model.inputs.samples_per_axis,
        "h": np.array(model.h),
    }


def save_model(model: SymbolicModel, path, explicit: bool = False) -> None:
    """Write a model dump.  Integrator models store their offset tables
    unless ``explicit`` asks for materialized CSR successor arrays."""
    arrays = _grid_arrays(model)
    if isinstance(model, IntegratorModel) and not explicit:
        arrays.update(kind=np.array("integrator"), off_lo=model.off_lo, off_hi=model.off_hi,
                      valid_lo=model.valid_lo, valid_hi=model.valid_hi)
    else:
        csr = model.to_csr()
        arrays.update(kind=np.array("csr"), indptr=csr.indptr, indices=csr.indices)
    write_npz(path, arrays)


def load_model(path) -> SymbolicModel:
    a = read_npz(path)
    grid = GridSpec(IntervalBox(a["grid_lo"], a["grid_hi"]), a["grid_eta"])
    inputs = InputGrid(a["input_bound"], a["input_samples"])
    h = float(a["h"])
    if str(a["kind"]) == "integrator":
        return IntegratorModel(grid, inputs, h, a["off_lo"], a["off_hi"], a["valid_lo"], a["valid_hi"])
    return CsrModel(grid, inputs, h, a["indptr"], a["indices"])
