import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vczsynth.confinement import (
    EXACT,
    FeasibilityBounds,
    FunnelParams,
    PsiConfig,
    VczParams,
    a_r_bound,
    check_feasibility,
    funnel,
    psi,
    psi_constants,
    psi_slope,
    solve_least_conservative,
    solve_most_efficient,
    torque,
    velocity_reference,
)
from vczsynth.errors import ContractViolation, FunnelBreach, Infeasible

SMOOTH = PsiConfig()
EXACT_CFG = PsiConfig(variant=EXACT)

# Running-example bounds: m_i * d = 1.5, mu (p - q) = 0.99.
PEND = FeasibilityBounds(3.0, 3.0, 1.0, 0.5, 0.1, 2.0)
PEND_FUNNEL = FunnelParams(1.0, 0.01, 1.0)
SCARA = FeasibilityBounds(1.5, 1.6, [5.0, 5.0], [0.2, 0.2], [0.2, 0.2], [10.0, 10.0])
SCARA_FUNNEL = FunnelParams(0.1, 0.01, 0.1)


class TestPsi:
    def test_values(self):
        assert psi(0.0) == 0.0
        assert psi(1.0) == pytest.approx(math.tanh(1.8) ** 3)
        assert psi(1.0) == pytest.approx(0.8487, abs=1e-4)
        assert psi(1.5, EXACT_CFG) == 1.0 and psi(-2.0, EXACT_CFG) == -1.0
        assert psi(1.0, EXACT_CFG) == pytest.approx(1.0)

    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_odd_monotone_bounded(self, a, b):
        for cfg in (SMOOTH, EXACT_CFG):
            assert psi(-a, cfg) == pytest.approx(-psi(a, cfg), abs=1e-15)
            lo, hi = sorted((a, b))
            assert psi(lo, cfg) <= psi(hi, cfg)
            assert abs(psi(a, cfg)) <= 1.0

    @given(st.floats(-2, 2))
    def test_slope_matches_finite_difference(self, s):
        h = 1e-6
        fd = (psi(s + h) - psi(s - h)) / (2 * h)
        assert psi_slope(s) == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_constants(self):
        slope, ratio = psi_constants()
        assert slope == pytest.approx(1.35, abs=0.01)
        assert ratio <= 0.9

    def test_contracts(self):
        with pytest.raises(ContractViolation):
            PsiConfig(a=0.0)
        with pytest.raises(ContractViolation):
            PsiConfig(variant="hard")


class TestLaw:
    def test_reference_on_boundary(self):
        vr = velocity_reference([0.018, 0.0], [0.0, 0.0], 0.018, [0.1, 0.1])
        assert np.linalg.norm(vr) == pytest.approx(0.8487 * 0.1, abs=1e-5)
        assert vr[0] < 0 and vr[1] == 0.0

    def test_reference_1d(self):
        vr = velocity_reference([0.009], [0.0], 0.018, [0.1])
        assert vr[0] == pytest.approx(-0.1 * math.tanh(0.9) ** 3)
        assert np.array_equal(velocity_reference([0.3], [0.3], 0.018, [0.1]), [0.0])

    def test_funnel_value(self):
        assert funnel(1.0, FunnelParams(1.0, 0.01, 1.0))[0] == pytest.approx(0.99 / math.e + 0.01)
        assert funnel(1.0, FunnelParams(1.0, 0.01, 1.0))[0] == pytest.approx(0.3742, abs=1e-4)
        assert funnel(0.0, PEND_FUNNEL)[0] == 1.0
        with pytest.raises(ContractViolation):
            funnel(-1.0, PEND_FUNNEL)

    def test_funnel_contracts(self):
        with pytest.raises(ContractViolation):
            FunnelParams(0.1, 0.2, 1.0)
        with pytest.raises(ContractViolation):
            FunnelParams(0.1, 0.01, 0.0)

    def test_torque_zero_error(self):
        vr = velocity_reference([0.01], [0.0], 0.018, [0.1])
        tau = torque([0.01], vr, [0.0], 0.0, PEND_FUNNEL, SMOOTH, [2.0], [0.1], 0.018)
        assert np.allclose(tau, 0.0)

    @given(st.floats(-1, 1), st.floats(-5, 5), st.floats(0, 10))
    def test_torque_saturated(self, x, v, t):
        tau = torque([x], [v], [0.0], t, PEND_FUNNEL, SMOOTH, [2.0], [0.1], 0.018)
        assert abs(tau[0]) <= 2.0

    def test_exact_breach(self):
        with pytest.raises(FunnelBreach) as exc:
            torque([0.0], [5.0], [0.0], 0.0, PEND_FUNNEL, EXACT_CFG, [2.0], [0.1], 0.018)
        assert exc.value.tau[0] == pytest.approx(-2.0)


class TestFeasibility:
    def test_a_r(self):
        assert a_r_bound(0.1, 0.1, 0.018) == pytest.approx(2.5)
        assert a_r_bound(0.2, 0.2, 0.019) == pytest.approx(9.474, abs=1e-3)
        with pytest.raises(ContractViolation):
            a_r_bound(0.1, 0.1, 0.0)

    def test_running_example(self):
        rep = check_feasibility(PEND, PEND_FUNNEL, VczParams(0.018, 0.1, 0.1, 0.02))
        assert rep.torque_rhs[0] == pytest.approx(1.997, abs=1e-3)
        assert rep.passed

    def test_lower_torque_fails(self):
        b = FeasibilityBounds(3.0, 3.0, 1.0, 0.5, 0.1, 1.9)
        rep = check_feasibility(b, PEND_FUNNEL, VczParams(0.018, 0.1, 0.1, 0.02))
        assert not rep.passed and rep.torque_slack[0] == pytest.approx(-0.097, abs=1e-3)

    def test_velocity_inequality(self):
        rep = check_feasibility(PEND, PEND_FUNNEL, VczParams(0.05, 0.2, 0.1, 0.02))
        assert not rep.velocity_ok and rep.velocity_slack[0] == pytest.approx(-0.1)

    def test_most_efficient(self):
        lam, u = solve_most_efficient(PEND, PEND_FUNNEL)
        assert lam == pytest.approx(0.2 / 11.156, rel=1e-3)
        assert lam == pytest.approx(0.0179, abs=1e-4) and np.allclose(u, 0.1)
        lam, u = solve_most_efficient(SCARA, SCARA_FUNNEL)
        assert lam == pytest.approx(0.18 / 9.671, rel=1e-6)
        assert lam == pytest.approx(0.0186, abs=1e-4)

    def test_least_conservative(self):
        lc = solve_least_conservative(PEND, PEND_FUNNEL)
        assert lc.lam_min == pytest.approx(0.009, abs=5e-4)
        for lam in (0.0095, 0.012, 0.015, 0.018, 0.03):
            want = min(0.1, 11.156 * lam - 0.1)
            assert lc.u_max(lam)[0] == pytest.approx(want, rel=5e-3)

    @given(st.floats(0.0091, 0.05))
    def test_selected_parameters_are_feasible(self, lam):
        lc = solve_least_conservative(PEND, PEND_FUNNEL)
        u = float(lc.u_max(lam)[0])
        if u <= 0:
            return
        rep = check_feasibility(PEND, PEND_FUNNEL, VczParams(lam, u, 0.1, 0.02))
        assert rep.torque_slack[0] >= -1e-12 and rep.velocity_ok

    def test_no_budget(self):
        b = FeasibilityBounds(3.0, 3.0, 10.0, 0.5, 0.1, 2.0)
        with pytest.raises(Infeasible):
            solve_most_efficient(b, PEND_FUNNEL)
        with pytest.raises(Infeasible):
            solve_least_conservative(b, PEND_FUNNEL)
