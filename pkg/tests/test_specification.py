import numpy as np
import pytest
from hypothesis import given, strategies as st

from vczsynth.errors import ContractViolation, SpecificationInfeasible
from vczsynth.geometry import IntervalBox
from vczsynth.specification import (
    RasSequence,
    RasTask,
    Separation,
    check_task_satisfaction,
    tighten,
)


def box(*pairs):
    return IntervalBox.from_bounds(pairs)


STAY_1D = box([-0.2, 0.2])


def test_pendulum_invariance_tightening():
    seq = RasSequence([RasTask([], [], STAY_1D)])
    out = tighten(seq, 0.018)
    assert np.allclose(out.tasks[0].stay.to_bounds(), [[-0.182, 0.182]])
    assert out.tasks[0].is_invariance


def test_scara_goal_with_delta():
    stay = box([-1, 1], [-1, 1])
    goal = box([0.7, 0.8], [-0.8, -0.7])
    seq = RasSequence([RasTask([goal], [], stay)])
    out = tighten(seq, 0.019, 0.001)
    assert np.allclose(out.tasks[0].goal[0].to_bounds(), [[0.72, 0.78], [-0.78, -0.72]])
    out = tighten(seq, 0.019, 0.010)
    assert np.allclose(out.tasks[0].goal[0].to_bounds(), [[0.729, 0.771], [-0.771, -0.729]])
    assert np.allclose(out.margin_used, 0.029)


def test_obstacle_and_separation_inflation():
    stay = box([0, 10], [0, 10], [0, 10], [0, 10])
    obs = box([4, 5], [4, 5], [0, 10], [0, 10])
    task = RasTask([], [obs], stay, [Separation((0, 1), (2, 3), 0.5)])
    out = tighten(RasSequence([task]), 0.3, 0.1).tasks[0]
    assert np.allclose(out.obstacles[0].lo, [3.6, 3.6, -0.4, -0.4])
    assert out.separations[0].distance == pytest.approx(0.5 + 0.8)


def test_goal_collapse_is_infeasible():
    seq = RasSequence([RasTask([box([0.0, 0.03])], [], STAY_1D)])
    with pytest.raises(SpecificationInfeasible):
        tighten(seq, 0.018)


def test_contracts():
    seq = RasSequence([RasTask([], [], STAY_1D)])
    with pytest.raises(ContractViolation):
        tighten(seq, 0.0)
    with pytest.raises(ContractViolation):
        tighten(seq, 0.1, -0.01)
    with pytest.raises(ContractViolation):
        RasTask([box([0.1, 0.5])], [], STAY_1D)
    with pytest.raises(ContractViolation):
        RasSequence([])
    with pytest.raises(ContractViolation):
        RasSequence([RasTask([], [], STAY_1D), RasTask([], [], box([-1, 1]))])


lam_s = st.floats(0.01, 0.3)
delta_s = st.floats(0.0, 0.1)


@given(lam_s, delta_s, st.integers(0, 2**31 - 1))
def test_tightening_is_sound(lam, delta, seed):
    """Every point within lam of a center that meets the tightened task meets the original."""
    rng = np.random.default_rng(seed)
    stay = box([0, 4], [0, 4], [0, 4], [0, 4])
    goal = box([2.5, 4], [2.5, 4], [0, 1.5], [0, 4])
    obs = box([1.5, 2.0], [1.5, 2.0], [0, 4], [0, 4])
    task = RasTask([goal], [obs], stay, [Separation((0, 1), (2, 3), 0.4)])
    t = tighten(RasSequence([task]), lam, delta).tasks[0]
    xi = rng.uniform(0, 4, size=(400, 4))
    dirs = rng.normal(size=(400, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x = xi + lam * rng.uniform(0, 1, size=(400, 1)) ** 0.25 * dirs
    ok = t.stay.contains_points(xi)
    assert np.all(stay.contains_points(x[ok]))
    ok = t.in_goal(xi)
    assert np.all(task.in_goal(x[ok]))
    ok = ~t.in_obstacle(xi)
    assert not np.any(task.in_obstacle(x[ok]))
    ok = t.separation_ok(xi)
    assert np.all(task.separation_ok(x[ok]))


@given(lam_s, lam_s, delta_s)
def test_tightening_monotone(l1, l2, delta):
    lo, hi = sorted((l1, l2))
    seq = RasSequence([RasTask([box([-1, 1], [-1, 1])], [box([2, 3], [2, 3])], box([-4, 4], [-4, 4]))])
    a, b = tighten(seq, lo, delta).tasks[0], tighten(seq, hi, delta).tasks[0]
    assert a.stay.contains_box(b.stay) and a.goal[0].contains_box(b.goal[0])
    assert b.obstacles[0].contains_box(a.obstacles[0])


class TestSatisfaction:
    def test_reach_then_reach(self):
        stay = box([0, 10])
        seq = RasSequence([RasTask([box([4, 5])], [box([7, 8])], stay),
                           RasTask([box([0, 1])], [], stay)])
        x = np.array([2, 3, 4.5, 6, 7.5, 3, 0.5])
        rep = check_task_satisfaction(x, seq)
        # the obstacle of task 0 is not active after its goal was reached
        assert rep.satisfied
        assert [v.reached_index for v in rep.tasks] == [2, 6]

    def test_obstacle_before_goal(self):
        stay = box([0, 10])
        seq = RasSequence([RasTask([box([8, 9])], [box([6, 7])], stay)])
        rep = check_task_satisfaction(np.array([5, 6.5, 8.5]), seq)
        assert not rep.satisfied and not rep.tasks[0].avoided

    def test_stay_violation(self):
        seq = RasSequence([RasTask([], [], STAY_1D)])
        rep = check_task_satisfaction(np.array([0.0, 0.1, 0.25, 0.0]), seq)
        assert rep.stay_violation_index == 2 and not rep.satisfied

    def test_never_reached(self):
        seq = RasSequence([RasTask([box([0.1, 0.2])], [], STAY_1D)])
        rep = check_task_satisfaction(np.zeros(5), seq)
        assert rep.tasks[0].reached_index is None and not rep.satisfied

    def test_separation(self):
        stay = box([0, 4], [0, 4], [0, 4], [0, 4])
        seq = RasSequence([RasTask([], [], stay, [Separation((0, 1), (2, 3), 1.0)])])
        rep = check_task_satisfaction(np.array([[0, 0, 2, 0], [1, 0, 1.5, 0]]), seq)
        assert not rep.tasks[0].separated
        rep = check_task_satisfaction(np.array([[0, 0, 2, 0]]), seq)
        assert rep.satisfied

    def test_empty(self):
        seq = RasSequence([RasTask([], [], STAY_1D)])
        with pytest.raises(ContractViolation):
            check_task_satisfaction(np.zeros((0, 1)), seq)
