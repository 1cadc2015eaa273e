"""Model-free confinement law and the feasibility / parameter-selection math.

Stage I turns the distance to the VCZ center into a saturated velocity
reference; stage II drives the velocity error through an exponentially
shrinking funnel with a saturated torque.  Nothing here knows the plant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, FunnelBreach, Infeasible
from .geometry import _vec

# Slope and ratio constants of the tanh^3(1.8 s) bound on |dv_r/dt|.
AR_SLOPE = 1.35
AR_RATIO = 0.9
AR_FACTOR = AR_SLOPE + AR_RATIO

SMOOTH = "smooth"
EXACT = "exact"


@dataclass(frozen=True)
class PsiConfig:
    """Saturation shape.

    ``smooth`` is ``tanh(a s)**3``.  ``exact`` rescales the same curve so it
    hits +-1 at ``|s| = 1`` and clips beyond, which meets the piecewise
    saturation definition (+-1 outside the unit interval, 0 at 0,
    nondecreasing) while staying continuous.
    """

    a: float = 1.8
    variant: str = SMOOTH

    def __post_init__(self):
        if not self.a > 0:
            raise ContractViolation("psi sharpness must be positive")
        if self.variant not in (SMOOTH, EXACT):
            raise ContractViolation(f"unknown psi variant {self.variant!r}")


def psi(s, cfg: PsiConfig = PsiConfig()):
    s = np.asarray(s, dtype=float)
    out = np.tanh(cfg.a * s) ** 3
    if cfg.variant == EXACT:
        out = np.clip(out / math.tanh(cfg.a) ** 3, -1.0, 1.0)
    return out if out.ndim else float(out)


def psi_slope(s, cfg: PsiConfig = PsiConfig()):
    """Analytic derivative of :func:`psi` (zero in the clipped region)."""
    s = np.asarray(s, dtype=float)
    th = np.tanh(cfg.a * s)
    d = 3.0 * cfg.a * th**2 * (1.0 - th**2)
    if cfg.variant == EXACT:
        d = np.where(np.abs(s) >= 1.0, 0.0, d / math.tanh(cfg.a) ** 3)
    return d if d.ndim else float(d)


def psi_constants(cfg: PsiConfig = PsiConfig(), resolution: float = 1e-4):
    """Grid maxima of ``dpsi/de`` on [0, 1] and ``psi(e)/e`` on (0, 1]."""
    e = np.arange(0.0, 1.0 + resolution / 2, resolution)
    slope = float(np.max(psi_slope(e, cfg)))
    e_pos = e[1:]
    ratio = float(np.max(psi(e_pos, cfg) / e_pos))
    return slope, ratio


@dataclass(frozen=True)
class FunnelParams:
    p_v: np.ndarray
    q_v: np.ndarray
    mu_v: np.ndarray

    def __post_init__(self):
        p = _vec(self.p_v, name="p_v")
        q = _vec(self.q_v, p.size, name="q_v")
        mu = _vec(self.mu_v, p.size, name="mu_v")
        if np.any(q <= 0) or np.any(q >= p):
            raise ContractViolation("funnel needs 0 < q_v < p_v on every axis")
        if np.any(mu <= 0):
            raise ContractViolation("funnel decay rates must be positive")
        object.__setattr__(self, "p_v", p)
        object.__setattr__(self, "q_v", q)
        object.__setattr__(self, "mu_v", mu)

    def broadcast(self, n: int) -> "FunnelParams":
        return FunnelParams(_vec(self.p_v, n), _vec(self.q_v, n), _vec(self.mu_v, n))

    @property
    def decay_term(self) -> np.ndarray:
        return self.mu_v * (self.p_v - self.q_v)


@dataclass(frozen=True)
class FeasibilityBounds:
    """Plant-side bounds: torque/disturbance scalings, drift bound, limits."""

    m_lower: float
    m_i_lower: float
    V_M_max: np.ndarray
    d_bar: np.ndarray
    v_bar: np.ndarray
    tau_bar: np.ndarray

    def __post_init__(self):
        if not (self.m_lower > 0 and self.m_i_lower > 0):
            raise ContractViolation("mass-matrix scalings must be positive")
        v = _vec(self.v_bar, name="v_bar")
        n = v.size
        for name in ("V_M_max", "d_bar", "tau_bar"):
            arr = _vec(getattr(self, name), n, name=name)
            if np.any(arr < 0):
                raise ContractViolation(f"{name} must be nonnegative")
            object.__setattr__(self, name, arr)
        if np.any(v <= 0) or np.any(self.tau_bar <= 0):
            raise ContractViolation("velocity and torque limits must be positive")
        object.__setattr__(self, "v_bar", v)

    @property
    def dim(self) -> int:
        return self.v_bar.size

    def torque_budget(self, fp: FunnelParams) -> np.ndarray:
        """``m tau - V_M - m_i d - mu (p - q)`` per axis: what is left for ``a_r``."""
        fp = fp.broadcast(self.dim)
        return (
            self.m_lower * self.tau_bar
            - self.V_M_max
            - self.m_i_lower * self.d_bar
            - fp.decay_term
        )


@dataclass(frozen=True)
class VczParams:
    lam: float
    u_bar: np.ndarray
    h: float
    eta: np.ndarray

    def __post_init__(self):
        u = _vec(self.u_bar, name="u_bar")
        eta = _vec(self.eta, u.size, name="eta")
        if not (self.lam > 0 and self.h > 0):
            raise ContractViolation("lambda and h must be positive")
        if np.any(u <= 0) or np.any(eta <= 0):
            raise ContractViolation("u_bar and eta must be positive")
        object.__setattr__(self, "u_bar", u)
        object.__setattr__(self, "eta", eta)


def velocity_reference(x, xi, lam: float, v_bar, cfg: PsiConfig = PsiConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    diff = x - np.asarray(xi, dtype=float)
    r = float(np.linalg.norm(diff))
    if r == 0.0:
        return np.zeros_like(x)
    return -np.asarray(v_bar, dtype=float) * psi(r / lam, cfg) * diff / r


def funnel(t: float, fp: FunnelParams) -> np.ndarray:
    if t < 0:
        raise ContractViolation("funnel time must be nonnegative")
    return np.exp(-fp.mu_v * t) * (fp.p_v - fp.q_v) + fp.q_v


def torque(x, v, xi, t, fp: FunnelParams, cfg: PsiConfig, tau_bar, v_bar, lam: float) -> np.ndarray:
    """Saturated funnel torque; always within ``tau_bar`` componentwise.

    In ``exact`` mode a normalized error outside (-1, 1) raises
    :class:`FunnelBreach` carrying the (saturated) command.
    """
    vr = velocity_reference(x, xi, lam, v_bar, cfg)
    eps = (np.asarray(v, dtype=float) - vr) / funnel(t, fp)
    tau = -np.asarray(tau_bar, dtype=float) * psi(eps, cfg)
    if cfg.variant == EXACT and np.any(np.abs(eps) >= 1.0):
        raise FunnelBreach(f"normalized velocity error {eps} left the funnel at t={t}", tau=tau)
    return tau


def a_r_bound(v_bar, u_bar, lam: float):
    """Uniform bound on ``|dv_r/dt|`` for the tanh^3(1.8 s) reference."""
    if not lam > 0:
        raise ContractViolation("lambda must be positive")
    v = np.asarray(v_bar, dtype=float)
    u = np.asarray(u_bar, dtype=float)
    out = AR_FACTOR * v * (v + u) / lam
    return out if out.ndim else float(out)


@dataclass
class FeasibilityReport:
    velocity_slack: np.ndarray
    torque_rhs: np.ndarray
    torque_slack: np.ndarray
    a_r: np.ndarray

    @property
    def velocity_ok(self) -> bool:
        return bool(np.all(self.velocity_slack >= 0))

    @property
    def torque_ok(self) -> bool:
        return bool(np.all(self.torque_slack >= 0))

    @property
    def passed(self) -> bool:
        return self.velocity_ok and self.torque_ok

    def as_dict(self) -> dict:
        return {
            "pass": self.passed,
            "velocity": {"ok": self.velocity_ok, "slack": self.velocity_slack.tolist()},
            "torque": {
                "ok": self.torque_ok,
                "rhs": self.torque_rhs.tolist(),
                "slack": self.torque_slack.tolist(),
            },
            "a_r": self.a_r.tolist(),
        }


def check_feasibility(bounds: FeasibilityBounds, fp: FunnelParams, params: VczParams) -> FeasibilityReport:
    """Evaluate ``v >= u`` and ``tau >= (V_M + m_i d + mu(p-q) + a_r) / m``."""
    n = bounds.dim
    fp = fp.broadcast(n)
    u = _vec(params.u_bar, n, name="u_bar")
    # Worst axis governs a_r, since the reference couples all axes through |x - xi|.
    a_r = np.full(n, float(np.max(a_r_bound(bounds.v_bar, u, params.lam))))
    rhs = (bounds.V_M_max + bounds.m_i_lower * bounds.d_bar + fp.decay_term + a_r) / bounds.m_lower
    return FeasibilityReport(bounds.v_bar - u, rhs, bounds.tau_bar - rhs, a_r)


def _budget_or_raise(bounds: FeasibilityBounds, fp: FunnelParams) -> np.ndarray:
    budget = bounds.torque_budget(fp)
    if np.any(budget <= 0):
        raise Infeasible(
            f"torque budget m*tau - V_M - m_i*d - mu(p-q) = {budget.tolist()} is not positive"
        )
    return budget


def solve_most_efficient(bounds: FeasibilityBounds, fp: FunnelParams):
    """Radius that lets the VCZ move as fast as the plant (``u_bar = v_bar``)."""
    budget = _budget_or_raise(bounds, fp)
    lam = float(np.max(2.0 * AR_FACTOR * bounds.v_bar**2 / budget))
    return lam, bounds.v_bar.copy()


@dataclass
class LeastConservative:
    lam_min: float
    u_max: Callable[[float], np.ndarray] = field(repr=False)


def solve_least_conservative(bounds: FeasibilityBounds, fp: FunnelParams) -> LeastConservative:
    """Smallest radius admitting any VCZ motion, plus the ``lam -> u_max`` map."""
    budget = _budget_or_raise(bounds, fp)
    v = bounds.v_bar
    lam_min = float(np.max(AR_FACTOR * v**2 / budget))

    def u_max(lam: float) -> np.ndarray:
        return np.minimum(v, lam / (AR_FACTOR * v) * budget - v)

    return LeastConservative(lam_min, u_max)
