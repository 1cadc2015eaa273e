"""Reach-avoid-stay task sequences, their tightening, and trace monitoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ContractViolation, SpecificationInfeasible
from .geometry import IntervalBox, _vec, dilate, erode


@dataclass(frozen=True)
class Separation:
    """Keep two groups of configuration axes at least ``distance`` apart.

    Used for multi-agent tasks where each agent owns a block of axes.
    """

    axes_a: tuple
    axes_b: tuple
    distance: float

    def __post_init__(self):
        object.__setattr__(self, "axes_a", tuple(int(a) for a in self.axes_a))
        object.__setattr__(self, "axes_b", tuple(int(b) for b in self.axes_b))
        if len(self.axes_a) != len(self.axes_b):
            raise ContractViolation("separation axis groups must have equal size")
        if self.distance < 0:
            raise ContractViolation("separation distance must be nonnegative")

    def gap(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        pts = pts.reshape(-1, pts.shape[-1])
        diff = pts[:, list(self.axes_a)] - pts[:, list(self.axes_b)]
        return np.linalg.norm(diff, axis=1)


@dataclass
class RasTask:
    """``eventually goal, always (stay minus obstacles)``.

    An empty ``goal`` list denotes a pure invariance task (always ``stay``).
    """

    goal: List[IntervalBox]
    obstacles: List[IntervalBox]
    stay: IntervalBox
    separations: List[Separation] = field(default_factory=list)

    def __post_init__(self):
        n = self.stay.dim
        for box in list(self.goal) + list(self.obstacles):
            if box.dim != n:
                raise ContractViolation("all task boxes must share the configuration dimension")
        for g in self.goal:
            if not self.stay.contains_box(g, tol=1e-12):
                raise ContractViolation(f"goal {g} is not inside stay {self.stay}")
        for sep in self.separations:
            if max(sep.axes_a + sep.axes_b) >= n:
                raise ContractViolation("separation axis out of range")

    @property
    def dim(self) -> int:
        return self.stay.dim

    @property
    def is_invariance(self) -> bool:
        return len(self.goal) == 0

    def in_goal(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        hit = np.zeros(len(pts), dtype=bool)
        for g in self.goal:
            hit |= g.contains_points(pts)
        return hit

    def in_obstacle(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        hit = np.zeros(len(pts), dtype=bool)
        for o in self.obstacles:
            hit |= o.contains_points(pts)
        return hit

    def separation_ok(self, points, strict: bool = False) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        ok = np.ones(len(pts), dtype=bool)
        for sep in self.separations:
            gap = sep.gap(pts)
            ok &= gap > sep.distance if strict else gap >= sep.distance
        return ok


@dataclass
class RasSequence:
    tasks: List[RasTask]

    def __post_init__(self):
        if not self.tasks:
            raise ContractViolation("a task sequence needs at least one task")
        first = self.tasks[0]
        for t in self.tasks[1:]:
            if t.dim != first.dim or not (t.stay == first.stay):
                raise ContractViolation("all tasks must share dimension and stay set")

    @property
    def dim(self) -> int:
        return self.tasks[0].dim

    def __len__(self):
        return len(self.tasks)


@dataclass
class TightenedSequence:
    tasks: List[RasTask]
    margin_used: np.ndarray
    # Which original sequence and radius produced this one, for monitors.
    lam: float = 0.0

    def __len__(self):
        return len(self.tasks)


def _tighten_task(task: RasTask, margin: np.ndarray, index: int) -> RasTask:
    stay = erode(task.stay, margin)
    if stay.empty:
        raise SpecificationInfeasible(f"task {index}: stay set {task.stay} erodes to empty")
    goal = []
    for j, g in enumerate(task.goal):
        eg = erode(g, margin)
        if eg.empty:
            raise SpecificationInfeasible(f"task {index}: goal box {j} {g} erodes to empty")
        goal.append(eg)
    obstacles = [dilate(o, margin) for o in task.obstacles]
    # Each confined point is within the per-axis margin of its center, so two
    # centers must keep the group distance plus both radii.
    seps = [
        Separation(s.axes_a, s.axes_b, s.distance + 2.0 * float(np.max(margin)))
        for s in task.separations
    ]
    return RasTask(goal, obstacles, stay, seps)


def tighten(seq: RasSequence, lam: float, delta=0.0) -> TightenedSequence:
    """Shrink goals and stay by ``lam + delta`` and inflate obstacles by the same.

    Box dilation is a superset of the Euclidean-ball dilation, so the
    tightened obstacles are conservative; box erosion is exact.
    """
    if not lam > 0:
        raise ContractViolation("VCZ radius must be positive")
    d = _vec(delta, seq.dim, name="delta")
    if np.any(d < 0):
        raise ContractViolation("robustness margin must be nonnegative")
    margin = lam + d
    tasks = [_tighten_task(t, margin, i) for i, t in enumerate(seq.tasks)]
    return TightenedSequence(tasks, margin, lam=float(lam))


@dataclass
class TaskVerdict:
    reached_index: Optional[int]
    avoided: bool
    stayed: bool
    separated: bool = True

    @property
    def satisfied(self) -> bool:
        return self.avoided and self.stayed and self.separated and (
            self.reached_index is not None
        )


@dataclass
class SatisfactionReport:
    tasks: List[TaskVerdict]
    stay_violation_index: Optional[int]
    satisfied: bool

    def as_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "stay_violation_index": self.stay_violation_index,
            "tasks": [
                {
                    "reached_index": v.reached_index,
                    "avoided": v.avoided,
                    "stayed": v.stayed,
                    "separated": v.separated,
                }
                for v in self.tasks
            ],
        }


def check_task_satisfaction(traj, seq: RasSequence) -> SatisfactionReport:
    """Monitor a densely sampled trace against the original sequence.

    ``traj`` is an ``(N, n)`` array of configurations or any object with an
    ``x`` attribute holding one.  Task ``i`` is active from the sample after
    task ``i-1`` was reached until its own goal is first entered; obstacles
    and separation are checked for the active task only.  Invariance tasks
    count as reached at the first sample and stay active to the end.
    """
    x = getattr(traj, "x", traj)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if seq.dim == 1 else x.reshape(1, -1)
    if len(x) == 0:
        raise ContractViolation("empty trajectory")
    stay = seq.tasks[0].stay
    in_stay = stay.contains_points(x)
    bad = np.flatnonzero(~in_stay)
    stay_violation = int(bad[0]) if bad.size else None

    verdicts = []
    start = 0
    n = len(x)
    for i, task in enumerate(seq.tasks):
        if start >= n:
            verdicts.append(TaskVerdict(None, True, stay_violation is None))
            continue
        if task.is_invariance:
            stop = n
            reached = start
        else:
            hits = np.flatnonzero(task.in_goal(x[start:]))
            reached = start + int(hits[0]) if hits.size else None
            stop = n if reached is None else reached + 1
        window = x[start:stop]
        avoided = not bool(task.in_obstacle(window).any())
        separated = bool(task.separation_ok(window).all())
        stayed = bool(in_stay[start:stop].all())
        verdicts.append(TaskVerdict(reached, avoided, stayed, separated))
        if reached is None:
            start = n
        else:
            start = reached + 1 if not task.is_invariance else n

    ok = stay_violation is None and all(v.satisfied for v in verdicts)
    return SatisfactionReport(verdicts, stay_violation, ok)
