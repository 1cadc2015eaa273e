"""Axis-aligned boxes and the uniform grid the VCZ abstraction lives on."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ContractViolation

# Relative slack used when comparing float coordinates against cell faces.
GRID_EPS = 1e-9


def _vec(values, n=None, name="value") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be a vector, got shape {arr.shape}")
    if n is not None:
        if arr.size == 1 and n > 1:
            arr = np.full(n, arr[0])
        elif arr.size != n:
            raise ContractViolation(f"{name} has dimension {arr.size}, expected {n}")
    return arr


@dataclass(frozen=True, eq=False)
class IntervalBox:
    """Closed hyper-interval ``[lo, hi]``; ``empty=True`` marks the empty box."""

    lo: np.ndarray
    hi: np.ndarray
    empty: bool = False

    def __post_init__(self):
        lo = _vec(self.lo, name="lo")
        hi = _vec(self.hi, lo.size, name="hi")
        if not self.empty and np.any(lo > hi):
            raise ContractViolation(f"box with lo > hi: {lo} / {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> "IntervalBox":
        """Build from per-axis ``[lo, hi]`` pairs (the scenario-file form)."""
        arr = np.asarray(bounds, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def empty_box(cls, n: int) -> "IntervalBox":
        return cls(np.zeros(n), np.zeros(n), empty=True)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def to_bounds(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    def contains(self, point, tol: float = 0.0) -> bool:
        if self.empty:
            return False
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))

    def contains_points(self, points) -> np.ndarray:
        """Vectorized membership for an ``(N, n)`` array."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        if self.empty:
            return np.zeros(len(pts), dtype=bool)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def contains_box(self, other: "IntervalBox", tol: float = 0.0) -> bool:
        if other.empty:
            return True
        if self.empty:
            return False
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def intersects(self, other: "IntervalBox") -> bool:
        if self.empty or other.empty:
            return False
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def __eq__(self, other):
        if not isinstance(other, IntervalBox):
            return NotImplemented
        if self.empty or other.empty:
            return self.empty == other.empty and self.dim == other.dim
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def isclose(self, other: "IntervalBox", atol: float = 1e-12) -> bool:
        if self.empty or other.empty:
            return self.empty == other.empty
        return np.allclose(self.lo, other.lo, atol=atol) and np.allclose(self.hi, other.hi, atol=atol)

    def __repr__(self):
        if self.empty:
            return f"IntervalBox.empty_box({self.dim})"
        return f"IntervalBox({self.to_bounds()})"


def erode(box: IntervalBox, margin) -> IntervalBox:
    """Shrink every face inward by ``margin``; collapses to the empty box."""
    m = _vec(margin, box.dim, name="margin")
    if np.any(m < 0):
        raise ContractViolation("erosion margin must be nonnegative")
    if box.empty:
        return box
    lo, hi = box.lo + m, box.hi - m
    if np.any(hi < lo):
        return IntervalBox.empty_box(box.dim)
    return IntervalBox(lo, hi)


def dilate(box: IntervalBox, margin) -> IntervalBox:
    m = _vec(margin, box.dim, name="margin")
    if np.any(m < 0):
        raise ContractViolation("dilation margin must be nonnegative")
    if box.empty:
        return box
    return IntervalBox(box.lo - m, box.hi + m)


class _Overflow:
    """Marker for points outside the covered grid domain."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OVERFLOW"

    def __reduce__(self):
        return (_Overflow, ())


OVERFLOW = _Overflow()

CellId = Union[tuple, _Overflow]


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform grid of closed cells of width ``eta`` anchored at ``domain.lo``.

    The grid covers ``[lo, lo + shape * eta]``, which contains ``domain``
    (the last cell on an axis may overhang when the width is not a multiple
    of ``eta``).
    """

    domain: IntervalBox
    eta: np.ndarray

    def __post_init__(self):
        if self.domain.empty:
            raise ContractViolation("grid domain is empty")
        eta = _vec(self.eta, self.domain.dim, name="eta")
        if np.any(eta <= 0):
            raise ContractViolation("eta must be positive on every axis")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        shape = tuple(
            max(1, int(math.ceil(w / e - GRID_EPS))) for w, e in zip(self.domain.width, eta)
        )
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def lo(self) -> np.ndarray:
        return self.domain.lo

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def covered(self) -> IntervalBox:
        return IntervalBox(self.lo, self.lo + np.asarray(self.shape) * self.eta)

    def flat(self, cell) -> int:
        if cell is OVERFLOW:
            return -1
        return int(np.ravel_multi_index(tuple(cell), self.shape))

    def unflat(self, index: int) -> tuple:
        if index < 0:
            return OVERFLOW
        return tuple(int(i) for i in np.unravel_index(int(index), self.shape))

    def cell_box(self, cell) -> IntervalBox:
        if cell is OVERFLOW:
            raise ContractViolation("overflow cell has no box")
        idx = np.asarray(cell, dtype=float)
        lo = self.lo + idx * self.eta
        return IntervalBox(lo, lo + self.eta)

    def cell_center(self, cell) -> np.ndarray:
        return self.lo + (np.asarray(cell, dtype=float) + 0.5) * self.eta

    def centers(self) -> np.ndarray:
        """``(n_cells, n)`` array of cell centers in flat order."""
        axes = [self.lo[i] + (np.arange(s) + 0.5) * self.eta[i] for i, s in enumerate(self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def axis_faces(self, axis: int) -> np.ndarray:
        return self.lo[axis] + np.arange(self.shape[axis] + 1) * self.eta[axis]


def quantize(point, grid: GridSpec) -> CellId:
    """Half-open binning ``[lo_k, lo_k + eta)``; the top face maps to the last cell.

    Points within ``GRID_EPS`` (in cell units) below a face snap onto it, the
    same rule :func:`cells_intersecting` uses, so rounding noise cannot split
    the two.
    """
    p = _vec(point, grid.dim, name="point")
    if not np.all(np.isfinite(p)):
        raise ContractViolation(f"non-finite coordinates: {p}")
    rel = (p - grid.lo) / grid.eta
    idx = []
    for r, s in zip(rel, grid.shape):
        k = math.floor(r + GRID_EPS)
        if k == s and r - s <= GRID_EPS:
            k = s - 1
        if k < 0 or k >= s:
            return OVERFLOW
        idx.append(k)
    return tuple(idx)


def quantize_many(points, grid: GridSpec) -> np.ndarray:
    """Vectorized :func:`quantize` returning flat indices, ``-1`` for overflow."""
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    if not np.all(np.isfinite(pts)):
        raise ContractViolation("non-finite coordinates")
    rel = (pts - grid.lo) / grid.eta
    idx = np.floor(rel + GRID_EPS).astype(np.int64)
    shape = np.asarray(grid.shape)
    top = (idx == shape) & (rel - shape <= GRID_EPS)
    idx[top] -= 1
    ok = np.all((idx >= 0) & (idx < shape), axis=1)
    out = np.full(len(pts), -1, dtype=np.int64)
    if ok.any():
        out[ok] = np.ravel_multi_index(tuple(idx[ok].T), grid.shape)
    return out


def reach_set(cell, u, h: float, grid: GridSpec) -> IntervalBox:
    """Exact reachable box of the single integrator from a cell after ``h``."""
    if cell is OVERFLOW:
        raise ContractViolation("reach_set of the overflow cell is undefined")
    if not h > 0:
        raise ContractViolation("sampling period h must be positive")
    box = grid.cell_box(cell)
    shift = h * _vec(u, grid.dim, name="u")
    return IntervalBox(box.lo + shift, box.hi + shift)


def cells_intersecting(box: IntervalBox, grid: GridSpec) -> list:
    """Per-axis inclusive index ranges of cells overlapping ``box``.

    Overlap means a common interior point (touching faces do not count),
    matching the half-open quantizer: every point of ``box`` quantizes into
    one of the returned cells.  Faces within ``GRID_EPS`` of a grid face snap
    onto it.  Returns ``None`` when the box leaves the covered domain.
    """
    if box.empty:
        return None
    ranges = []
    for i in range(grid.dim):
        lo_rel = (box.lo[i] - grid.lo[i]) / grid.eta[i]
        hi_rel = (box.hi[i] - grid.lo[i]) / grid.eta[i]
        if lo_rel < -GRID_EPS or hi_rel > grid.shape[i] + GRID_EPS:
            return None
        first = min(grid.shape[i] - 1, max(0, math.floor(lo_rel + GRID_EPS)))
        last = min(grid.shape[i] - 1, math.ceil(hi_rel - GRID_EPS) - 1)
        ranges.append((first, max(first, last)))
    return ranges


def cells_intersecting_many(lo, hi, grid: GridSpec):
    """Row-wise :func:`cells_intersecting` for boxes stacked as ``(k, n)`` arrays.

    Returns ``(first, last, inside)``; rows with ``inside`` false leave the
    covered domain and their ranges are meaningless.
    """
    lo_rel = (np.asarray(lo, dtype=float) - grid.lo) / grid.eta
    hi_rel = (np.asarray(hi, dtype=float) - grid.lo) / grid.eta
    shape = np.asarray(grid.shape)
    inside = np.all((lo_rel >= -GRID_EPS) & (hi_rel <= shape + GRID_EPS) & (lo_rel <= hi_rel), axis=1)
    first = np.minimum(shape - 1, np.maximum(0, np.floor(lo_rel + GRID_EPS))).astype(np.int64)
    last = np.minimum(shape - 1, np.ceil(hi_rel - GRID_EPS) - 1).astype(np.int64)
    return first, np.maximum(first, last), inside


def box_distance(a: IntervalBox, b: IntervalBox) -> float:
    """Euclidean distance between two boxes (0 when they overlap)."""
    gap = np.maximum(0.0, np.maximum(a.lo - b.hi, b.lo - a.hi))
    return float(np.linalg.norm(gap))
