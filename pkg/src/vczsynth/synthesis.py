"""Fixed-point games on the symbolic model and refinement to concrete policies.

Integrator models are solved densely: Post is a translation-invariant box of
offsets, so ``CPre`` is a separable erosion of the target mask, one shifted
AND per offset and axis.  Explicit (CSR) models use FIFO worklists over the
transposed transition relation, run by the compiled kernels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels
from .abstraction import AbstractSets, CsrModel, InputGrid, IntegratorModel, SymbolicModel, abstract_sets
from .artifacts import read_npz, write_npz
from .errors import CompositionError, ContractViolation, InfeasibleTask, OutsideDomain
from .geometry import OVERFLOW, GridSpec, IntervalBox, _vec, quantize

REACH = "reach"
INVARIANCE = "invariance"
_INF = np.iinfo(np.int64).max // 2


@dataclass(frozen=True)
class Margin:
    delta: np.ndarray


def compute_delta(u_bound, h: float, eta) -> Margin:
    """Robustness margin ``u_bar h / 2 + eta`` per axis."""
    u = _vec(u_bound, name="u_bound")
    e = _vec(eta, u.size, name="eta")
    if not h > 0 or np.any(u < 0) or np.any(e < 0):
        raise ContractViolation("margin inputs must be nonnegative with h > 0")
    return Margin(u * h / 2.0 + e)


@dataclass(eq=False)
class TaskController:
    """One sub-task: winning cells, permissive policy, value rank, chosen action.

    ``value`` is the fixed-point entry level (0 on goal cells, -1 outside the
    winning domain); ``action`` is the runtime input, -1 outside.
    """

    kind: str
    winning: np.ndarray
    policy: np.ndarray
    value: np.ndarray
    action: np.ndarray
    goal: np.ndarray
    unsafe: np.ndarray
    stay: np.ndarray

    @property
    def domain_size(self) -> int:
        return int(self.winning.sum())

    def policy_inputs(self, cell: int) -> np.ndarray:
        return np.flatnonzero(self.policy[cell])


@dataclass(eq=False)
class SymbolicController:
    grid: GridSpec
    inputs: InputGrid
    h: float
    tasks: List[TaskController] = field(default_factory=list)

    def __len__(self):
        return len(self.tasks)

    def __getitem__(self, i) -> TaskController:
        return self.tasks[i]

    def refine(self, task_index: int = 0) -> "RefinedPolicy":
        return refine(self.tasks[task_index], self.grid, self.inputs)

    def stats(self) -> dict:
        return {
            "cells": self.grid.n_cells,
            "inputs": self.inputs.size,
            "tasks": [
                {"kind": t.kind, "domain_size": t.domain_size, "goal_cells": int(t.goal.sum()),
                 "max_value": int(t.value.max(initial=-1))}
                for t in self.tasks
            ],
        }


# -- dense solver for integrator models -------------------------------------


def _shift_reduce(arr, axis, a, b, ufunc, fill):
    """``out[k] = ufunc.reduce(arr[k+a .. k+b])`` along ``axis``; outside -> ``fill``."""
    out = np.full_like(arr, fill)
    n = arr.shape[axis]
    for o in range(a, b + 1):
        if abs(o) >= n:
            continue
        dst = [slice(None)] * arr.ndim
        src = [slice(None)] * arr.ndim
        if o >= 0:
            dst[axis], src[axis] = slice(0, n - o), slice(o, n)
        else:
            dst[axis], src[axis] = slice(-o, n), slice(0, n + o)
        view = out[tuple(dst)]
        ufunc(view, arr[tuple(src)], out=view)
    return out


def _for_each_input(model: IntegratorModel, arr, ufunc, fill, callback):
    """Apply the per-input successor reduction, sharing prefixes across axes."""
    n = model.grid.dim
    keys = [tuple(zip(model.off_lo[u], model.off_hi[u])) for u in range(model.n_inputs)]

    def rec(cur, axis, members):
        if axis == n:
            for u in members:
                callback(u, cur)
            return
        groups = {}
        for u in members:
            groups.setdefault(keys[u][axis], []).append(u)
        for k in sorted(groups):
            rec(_shift_reduce(cur, axis, k[0], k[1], ufunc, fill), axis + 1, groups[k])

    rec(arr, 0, list(range(model.n_inputs)))


def _dense_cpre(model: IntegratorModel, target: np.ndarray, valid) -> np.ndarray:
    out = np.zeros(model.grid.shape, dtype=bool)

    def cb(u, eroded):
        np.logical_or(out, eroded & valid[u], out=out)

    _for_each_input(model, target, np.logical_and, True, cb)
    return out


def _dense_policy(model: IntegratorModel, level: np.ndarray, valid, select):
    """Per-input max successor level, turned into policy and greedy action.

    The action minimizes the max successor level, ties to the smallest index.
    """
    shape = model.grid.shape
    policy = np.zeros(shape + (model.n_inputs,), dtype=bool)
    best = np.full(shape, _INF, dtype=np.int64)
    action = np.full(shape, -1, dtype=np.int64)

    def cb(u, mx):
        ok = select(mx) & valid[u]
        policy[..., u] = ok
        tie = (mx == best) & (action > u)
        better = ok & ((mx < best) | tie | (action < 0))
        best[better] = mx[better]
        action[better] = u

    _for_each_input(model, level, np.maximum, -1, cb)
    return policy, action


def _valid_masks(model: IntegratorModel):
    return [model.valid_mask(u) for u in range(model.n_inputs)]


def _dense_reach(model: IntegratorModel, goal, allowed):
    shape = model.grid.shape
    goal = goal.reshape(shape)
    allowed = allowed.reshape(shape)
    valid = _valid_masks(model)
    level = np.full(shape, _INF, dtype=np.int64)
    level[goal] = 0
    win = goal.copy()
    k = 0
    while True:
        k += 1
        new = _dense_cpre(model, win, valid) & allowed & ~win
        if not new.any():
            break
        level[new] = k
        win |= new
    lev = level

    def select(mx):
        return (mx < lev) | (goal & (mx < _INF))

    policy, action = _dense_policy(model, level, valid, select)
    policy &= win[..., None]
    action[~win] = -1
    return win, level, policy, action


def _dense_invariance(model: IntegratorModel, safe):
    shape = model.grid.shape
    valid = _valid_masks(model)
    win = safe.reshape(shape).copy()
    while True:
        nxt = win & _dense_cpre(model, win, valid)
        if np.array_equal(nxt, win):
            break
        win = nxt
    # Level 0 inside, "infinite" outside: an input is invariant iff max < INF.
    level = np.where(win, 0, _INF).astype(np.int64)
    policy, action = _dense_policy(model, level, valid, lambda mx: mx < _INF)
    policy &= win[..., None]
    action[~win] = -1
    return win, policy, action


# -- worklist solver for explicit models ----------------------------------


def _transpose(csr: CsrModel):
    counts = np.diff(csr.indptr)
    pairs = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    order = np.argsort(csr.indices, kind="stable")
    pred_pairs = np.ascontiguousarray(pairs[order])
    pred_ptr = np.zeros(csr.n_cells + 1, dtype=np.int64)
    np.cumsum(np.bincount(csr.indices, minlength=csr.n_cells), out=pred_ptr[1:])
    return pred_ptr, pred_pairs, counts


def _pair_reduce(csr: CsrModel, values: np.ndarray, ufunc, empty):
    """Reduce ``values[successor]`` over each pair's successor list."""
    counts = np.diff(csr.indptr)
    out = np.full(counts.size, empty, dtype=values.dtype)
    nz = counts > 0
    if csr.indices.size:
        red = ufunc.reduceat(values[csr.indices], csr.indptr[:-1][nz])
        out[nz] = red
    return out


def _greedy_action(policy: np.ndarray, score: np.ndarray) -> np.ndarray:
    s = np.where(policy, score, _INF)
    act = np.argmin(s, axis=1)
    act[~policy.any(axis=1)] = -1
    return act


def _csr_reach(model: SymbolicModel, goal, allowed, backend=None):
    k = backend or _kernels.kernels
    csr = model.to_csr()
    m = csr.n_inputs
    pred_ptr, pred_pairs, counts = _transpose(csr)
    level = k.reach_worklist(pred_ptr, pred_pairs, counts, m, goal, allowed)
    win = level >= 0
    lev = np.where(win, level, _INF)
    mx = _pair_reduce(csr, lev, np.maximum, _INF).reshape(-1, m)
    enabled = counts.reshape(-1, m) > 0
    policy = enabled & win[:, None] & ((mx < lev[:, None]) | (goal[:, None] & (mx < _INF)))
    return win, lev, policy, _greedy_action(policy, mx)


def _csr_invariance(model: SymbolicModel, safe, backend=None):
    k = backend or _kernels.kernels
    csr = model.to_csr()
    m = csr.n_inputs
    pred_ptr, pred_pairs, counts = _transpose(csr)
    inside = _pair_reduce(csr, safe.astype(np.int8), np.minimum, 0).astype(bool)
    good = (counts > 0) & inside
    win = k.safety_worklist(pred_ptr, pred_pairs, good, m, safe)
    policy = good.reshape(-1, m) & win[:, None]
    return win, policy, _greedy_action(policy, np.zeros(policy.shape, dtype=np.int64))


# -- public API --------------------------------------------------------------


def _mask(cells, n_cells: int) -> np.ndarray:
    arr = np.asarray(cells)
    if arr.dtype == bool:
        if arr.size != n_cells:
            raise ContractViolation("cell mask has the wrong length")
        return arr.ravel().copy()
    out = np.zeros(n_cells, dtype=bool)
    idx = arr.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n_cells):
        raise ContractViolation("cell index outside the grid")
    out[idx] = True
    return out


def solve_reach_avoid(model: SymbolicModel, goal, unsafe, stay, dense: Optional[bool] = None,
                      backend=None) -> TaskController:
    """Least fixed point of ``Z -> goal | (CPre(Z) & stay & ~unsafe)``.

    ``goal``, ``unsafe`` and ``stay`` are boolean masks or flat index lists.
    Goal cells are pruned to ``goal & stay & ~unsafe``.  The policy keeps the
    inputs that certify progress (every successor has a strictly smaller
    value); at goal cells, every input whose successors stay winning.
    """
    n = model.n_cells
    goal, unsafe, stay = _mask(goal, n), _mask(unsafe, n), _mask(stay, n)
    goal = goal & stay & ~unsafe
    if not goal.any():
        raise InfeasibleTask("goal set is empty after removing unsafe and out-of-stay cells")
    allowed = stay & ~unsafe
    if dense is None:
        dense = isinstance(model, IntegratorModel)
    if dense:
        win, lev, policy, action = _dense_reach(model, goal, allowed)
        m = model.n_inputs
        win, lev, policy, action = win.ravel(), lev.ravel(), policy.reshape(-1, m), action.ravel()
    else:
        win, lev, policy, action = _csr_reach(model, goal, allowed, backend)
    # Goal cells whose successors all leave the winning set keep every enabled input.
    enabled = model.post_counts() > 0
    stuck = goal & ~policy.any(axis=1)
    if stuck.any():
        policy[stuck] = enabled[stuck]
        first = np.argmax(enabled[stuck], axis=1)
        action[stuck] = np.where(enabled[stuck].any(axis=1), first, -1)
    value = np.where(win, lev, -1).astype(np.int64)
    return TaskController(REACH, win, policy, value, action.astype(np.int64), goal, unsafe, stay)


def solve_invariance(model: SymbolicModel, safe, dense: Optional[bool] = None, backend=None) -> TaskController:
    """Greatest fixed point of ``Z -> safe & CPre(Z)``."""
    n = model.n_cells
    safe = _mask(safe, n)
    if not safe.any():
        raise InfeasibleTask("safe set is empty")
    if dense is None:
        dense = isinstance(model, IntegratorModel)
    if dense:
        win, policy, action = _dense_invariance(model, safe)
        win, policy, action = win.ravel(), policy.reshape(n, -1), action.ravel()
    else:
        win, policy, action = _csr_invariance(model, safe, backend)
    if not win.any():
        raise InfeasibleTask("no cell of the safe set can be kept invariant")
    value = np.where(win, 0, -1).astype(np.int64)
    empty = np.zeros(n, dtype=bool)
    return TaskController(INVARIANCE, win, policy, value, action.astype(np.int64), empty, ~safe, safe)


@dataclass
class RefinedPolicy:
    """Concrete policy ``xi -> u``: quantize, then the cell's chosen input."""

    task: TaskController
    grid: GridSpec
    inputs: InputGrid

    def cell(self, xi) -> int:
        c = quantize(xi, self.grid)
        if c is OVERFLOW:
            raise OutsideDomain(f"{np.asarray(xi).tolist()} is outside the grid", cell=OVERFLOW)
        return self.grid.flat(c)

    def contains(self, xi) -> bool:
        c = quantize(xi, self.grid)
        return c is not OVERFLOW and bool(self.task.winning[self.grid.flat(c)])

    def input_index(self, xi) -> int:
        flat = self.cell(xi)
        if not self.task.winning[flat]:
            raise OutsideDomain(
                f"{np.asarray(xi).tolist()} quantizes to non-winning cell {self.grid.unflat(flat)}",
                cell=self.grid.unflat(flat),
            )
        return int(self.task.action[flat])

    def __call__(self, xi) -> np.ndarray:
        return self.inputs.values[self.input_index(xi)].copy()


def refine(controller, grid: GridSpec, inputs: Optional[InputGrid] = None) -> RefinedPolicy:
    if isinstance(controller, SymbolicController):
        inputs = controller.inputs
        controller = controller.tasks[0]
    if inputs is None:
        raise ContractViolation("refine needs the input grid")
    if not controller.winning.any():
        raise ContractViolation("cannot refine an empty controller")
    return RefinedPolicy(controller, grid, inputs)


def synthesize_sequence(model: SymbolicModel, seq, sets: Optional[List[AbstractSets]] = None,
                        prune_goals: bool = True) -> SymbolicController:
    """Solve every sub-task and chain them.

    With ``prune_goals`` (default) tasks are solved last to first and each
    goal is restricted to cells winning for the next task, so every switch
    lands inside the next domain by construction.  Without it, tasks are
    solved independently and any goal cell outside the next domain raises.
    """
    if sets is None:
        sets = abstract_sets(seq, model.grid)
    n_tasks = len(sets)
    for i, s in enumerate(sets[:-1]):
        if s.is_invariance:
            raise ContractViolation(f"invariance task {i} never completes; it must be last")
    ctrls: List[Optional[TaskController]] = [None] * n_tasks
    nxt = None
    for i in reversed(range(n_tasks)):
        s = sets[i]
        if s.is_invariance:
            ctrls[i] = solve_invariance(model, s.stay & ~s.unsafe)
            nxt = ctrls[i]
            continue
        goal = s.goal & s.stay & ~s.unsafe
        if nxt is not None:
            gap = goal & ~nxt.winning
            if prune_goals:
                goal = goal & nxt.winning
                if not goal.any():
                    raise CompositionError(
                        f"no goal cell of task {i} is winning for task {i + 1}",
                        cells=[model.grid.unflat(int(c)) for c in np.flatnonzero(gap)],
                    )
            elif gap.any():
                raise CompositionError(
                    f"{int(gap.sum())} goal cells of task {i} are not winning for task {i + 1}",
                    cells=[model.grid.unflat(int(c)) for c in np.flatnonzero(gap)],
                )
        ctrls[i] = solve_reach_avoid(model, goal, s.unsafe, s.stay)
        nxt = ctrls[i]
    return SymbolicController(model.grid, model.inputs, model.h, ctrls)


# -- export ------------------------------------------------------------------


def save_controller(ctrl: SymbolicController, path) -> None:
    arrays = {
        "grid_lo": ctrl.grid.domain.lo,
        "grid_hi": ctrl.grid.domain.hi,
        "grid_eta": ctrl.grid.eta,
        "input_bound": ctrl.inputs.bound,
        "input_samples": ctrl.inputs.samples_per_axis,
        "h": np.array(ctrl.h),
        "n_tasks": np.array(len(ctrl.tasks)),
    }
    for i, t in enumerate(ctrl.tasks):
        cells = np.flatnonzero(t.winning)
        arrays[f"t{i}_kind"] = np.array(t.kind)
        arrays[f"t{i}_cells"] = cells
        arrays[f"t{i}_value"] = t.value[cells]
        arrays[f"t{i}_action"] = t.action[cells]
        arrays[f"t{i}_policy"] = np.packbits(t.policy[cells], axis=1)
        for name in ("goal", "unsafe", "stay"):
            arrays[f"t{i}_{name}"] = np.packbits(getattr(t, name))
    write_npz(path, arrays)


def load_controller(path) -> SymbolicController:
    a = read_npz(path)
    grid = GridSpec(IntervalBox(a["grid_lo"], a["grid_hi"]), a["grid_eta"])
    inputs = InputGrid(a["input_bound"], a["input_samples"])
    n, m = grid.n_cells, inputs.size
    tasks = []
    for i in range(int(a["n_tasks"])):
        cells = a[f"t{i}_cells"]
        win = np.zeros(n, dtype=bool)
        win[cells] = True
        value = np.full(n, -1, dtype=np.int64)
        value[cells] = a[f"t{i}_value"]
        action = np.full(n, -1, dtype=np.int64)
        action[cells] = a[f"t{i}_action"]
        policy = np.zeros((n, m), dtype=bool)
        policy[cells] = np.unpackbits(a[f"t{i}_policy"], axis=1, count=m).astype(bool)
        masks = {k: np.unpackbits(a[f"t{i}_{k}"], count=n).astype(bool) for k in ("goal", "unsafe", "stay")}
        tasks.append(TaskController(str(a[f"t{i}_kind"]), win, policy, value, action, **masks))
    return SymbolicController(grid, inputs, float(a["h"]), tasks)
