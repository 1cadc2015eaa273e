"""Euler-Lagrange plants used only by the simulator, plus disturbance sources.

The confinement controller never imports this module; the simulator is the
only place where measurements ``(x, v)`` and torques meet a plant model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ContractViolation
from .geometry import IntervalBox, _vec

G_EARTH = 9.81


def pendulum_accel(x, v, tau, d, m: float = 1.0 / 9.0, l: float = 3.0, g: float = G_EARTH):
    """Uniform rod about its end: ``(m l^2/3) x'' + (m g l/2) sin x = tau + d``."""
    if not (m > 0 and l > 0):
        raise ContractViolation("pendulum mass and length must be positive")
    x = np.asarray(x, dtype=float)
    return 3.0 / (m * l * l) * (np.asarray(tau) + np.asarray(d)) - 1.5 * g / l * np.sin(x)


def scara_matrices(theta, omega, m: float, l: float, g: float, J: float = 0.0):
    """Mass matrix, Coriolis vector, and gravity vector of the two-link arm.

    ``J`` is reflected actuator inertia added to both diagonal entries;
    ``J = 0`` gives the bare link model.
    """
    t1, t2 = float(theta[0]), float(theta[1])
    w1, w2 = float(omega[0]), float(omega[1])
    c1, c2, s2, c12 = math.cos(t1), math.cos(t2), math.sin(t2), math.cos(t1 + t2)
    ml2 = m * l * l
    M = ml2 * np.array([[5.0 / 3.0 + c2, 1.0 / 3.0 + 0.5 * c2], [0.5 * c2, 1.0 / 3.0]]) + J * np.eye(2)
    C = ml2 * s2 * np.array([-0.5 * w2 * w2 - w1 * w2, 0.5 * w2 * w2])
    G = m * g * l * np.array([1.5 * c1 + 0.5 * c12, 0.5 * c12])
    return M, C, G


def scara_accel(theta, omega, tau, d, m: float = 0.01, l: float = 0.5, g: float = G_EARTH, J: float = 0.635):
    M, C, G = scara_matrices(theta, omega, m, l, g, J)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    # Bare links: det = m^2 l^4 (5/9 + c2/6 - c2^2/4) >= 0.138 m^2 l^4; J > 0 only adds.
    assert abs(det) > 1e-12 * (m * l * l + J) ** 2, "singular SCARA mass matrix"
    rhs = np.asarray(tau, dtype=float) + np.asarray(d, dtype=float) - C - G
    return np.array(
        [
            (M[1, 1] * rhs[0] - M[0, 1] * rhs[1]) / det,
            (M[0, 0] * rhs[1] - M[1, 0] * rhs[0]) / det,
        ]
    )


def multi_agent_accel(x, v, tau, d):
    """Point-mass agents: unit mass, acceleration equals input plus disturbance."""
    return np.asarray(tau, dtype=float) + np.asarray(d, dtype=float)


@dataclass(frozen=True)
class Plant:
    """A registered plant: name, configuration dimension, and parameters.

    ``kernel_id`` selects the matching dynamics inside the compiled
    simulation kernel.
    """

    name: str
    n: int
    params: Dict[str, float] = field(default_factory=dict)

    def accel(self, x, v, tau, d) -> np.ndarray:
        if self.name == "pendulum":
            return np.atleast_1d(pendulum_accel(x, v, tau, d, **self.params))
        if self.name == "scara2":
            return scara_accel(x, v, tau, d, **self.params)
        return multi_agent_accel(x, v, tau, d)

    @property
    def kernel_id(self) -> int:
        return PLANT_KERNEL_IDS[self.name]

    @property
    def param_vector(self) -> np.ndarray:
        if self.name == "pendulum":
            return np.array([self.params["m"], self.params["l"], self.params["g"], 0.0])
        if self.name == "scara2":
            p = self.params
            return np.array([p["m"], p["l"], p["g"], p["J"]])
        return np.zeros(4)


PLANT_KERNEL_IDS = {"pendulum": 0, "scara2": 1, "agents2x2d": 2}

_DEFAULTS = {
    # m l^2 = 1 makes 3/(m l^2) equal the declared scalings exactly, and
    # l = 3 keeps (3g/2l) sin(0.2) = 0.97 under the declared drift bound 1.
    "pendulum": (1, {"m": 1.0 / 9.0, "l": 3.0, "g": G_EARTH}),
    # Light links on stiff actuators: reflected inertia J dominates the mass
    # matrix, which is what makes M^-1 close enough to diagonal for the
    # declared scalings (see audit_bounds).
    "scara2": (2, {"m": 0.01, "l": 0.5, "g": G_EARTH, "J": 0.635}),
    "agents2x2d": (4, {}),
}


def make_plant(name: str, params: Optional[dict] = None) -> Plant:
    if name not in _DEFAULTS:
        raise ContractViolation(f"unknown plant {name!r}; known: {sorted(_DEFAULTS)}")
    n, defaults = _DEFAULTS[name]
    merged = dict(defaults)
    for key, value in (params or {}).items():
        if key not in defaults:
            raise ContractViolation(f"plant {name!r} has no parameter {key!r}")
        merged[key] = float(value)
    return Plant(name, n, merged)


@dataclass(frozen=True)
class PlantState:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = _vec(self.x, name="x")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", _vec(self.v, x.size, name="v"))


ZERO = "zero"
SINUSOIDAL = "sinusoidal"
UNIFORM = "uniform-random"
_DIST_KINDS = {ZERO: 0, SINUSOIDAL: 1, UNIFORM: 2}

_BLOCK = 4096


@dataclass
class DisturbanceSpec:
    """Bounded disturbance ``|d(t)| <= amplitude``.

    ``sinusoidal``: ``amplitude * sin(2 pi f t + phase)`` per axis.
    ``uniform-random``: piecewise constant over windows of length ``hold``,
    each window drawn uniformly from ``[-amplitude, amplitude]``; the value at
    any ``t`` depends only on ``seed`` and the window index.
    """

    kind: str = ZERO
    amplitude: np.ndarray = field(default_factory=lambda: np.zeros(1))
    frequency: np.ndarray = field(default_factory=lambda: np.ones(1))
    phase: np.ndarray = field(default_factory=lambda: np.zeros(1))
    seed: int = 0
    hold: float = 0.01

    def __post_init__(self):
        if self.kind not in _DIST_KINDS:
            raise ContractViolation(f"unknown disturbance kind {self.kind!r}")
        amp = _vec(self.amplitude, name="amplitude")
        if np.any(amp < 0):
            raise ContractViolation("disturbance amplitude must be nonnegative")
        self.amplitude = amp
        self.frequency = _vec(self.frequency, amp.size, name="frequency")
        self.phase = _vec(self.phase, amp.size, name="phase")
        if not self.hold > 0:
            raise ContractViolation("hold must be positive")
        self._blocks = {}

    @property
    def kind_id(self) -> int:
        return _DIST_KINDS[self.kind]

    def broadcast(self, n: int) -> "DisturbanceSpec":
        return DisturbanceSpec(
            self.kind,
            _vec(self.amplitude, n),
            _vec(self.frequency, n),
            _vec(self.phase, n),
            self.seed,
            self.hold,
        )

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            rng = np.random.default_rng([int(self.seed), int(b)])
            blk = rng.uniform(-1.0, 1.0, size=(_BLOCK, self.amplitude.size))
            if len(self._blocks) > 64:
                self._blocks.clear()
            self._blocks[b] = blk
        return blk

    def window_values(self, start: int, count: int) -> np.ndarray:
        """Random values for windows ``start .. start+count-1`` (uniform kind)."""
        out = np.empty((count, self.amplitude.size))
        k = start
        i = 0
        while i < count:
            b, off = divmod(k, _BLOCK)
            take = min(_BLOCK - off, count - i)
            out[i : i + take] = self._block(b)[off : off + take]
            i += take
            k += take
        return out * self.amplitude

    def window_index(self, t: float) -> int:
        return int(math.floor(t / self.hold + 1e-9))

    def sample(self, t: float) -> np.ndarray:
        if self.kind == ZERO:
            return np.zeros(self.amplitude.size)
        if self.kind == SINUSOIDAL:
            return self.amplitude * np.sin(2.0 * math.pi * self.frequency * t + self.phase)
        return self.window_values(self.window_index(t), 1)[0]


def sample_disturbance(spec: DisturbanceSpec, t: float) -> np.ndarray:
    return spec.sample(t)


@dataclass
class BoundAudit:
    V_M_observed: np.ndarray
    tau_scaling_observed: np.ndarray
    dist_scaling_observed: np.ndarray
    vm_ok: bool
    tau_ok: bool
    dist_ok: bool

    @property
    def passed(self) -> bool:
        return self.vm_ok and self.tau_ok and self.dist_ok

    def as_dict(self) -> dict:
        return {
            "V_M_observed": self.V_M_observed.tolist(),
            "tau_scaling_observed": self.tau_scaling_observed.tolist(),
            "dist_scaling_observed": self.dist_scaling_observed.tolist(),
            "vm_ok": self.vm_ok,
            "tau_ok": self.tau_ok,
            "dist_ok": self.dist_ok,
        }


def audit_bounds(plant: Plant, bounds, config_box: IntervalBox, samples: int = 20000, seed: int = 0) -> BoundAudit:
    """Sample states and check the declared drift and input-scaling bounds.

    Over ``x`` in ``config_box`` and ``|v| <= v_bar``:
    ``|-M^-1 (V + G)| <= V_M_max``, ``M^-1 tau_bar >= m_lower * tau_bar`` and
    ``|M^-1 d| <= m_i_lower * d_bar`` for every ``|d| <= d_bar``.
    Observed worst values are returned alongside the verdicts.
    """
    rng = np.random.default_rng(seed)
    n = plant.n
    xs = rng.uniform(config_box.lo, config_box.hi, size=(samples, n))
    vs = rng.uniform(-bounds.v_bar, bounds.v_bar, size=(samples, n))
    zero = np.zeros(n)
    vm_max = np.zeros(n)
    tau_min = np.full(n, np.inf)
    dist_max = np.zeros(n)
    eye = np.eye(n)
    for x, v in zip(xs, vs):
        drift = plant.accel(x, v, zero, zero)
        vm_max = np.maximum(vm_max, np.abs(drift))
        minv = np.column_stack([plant.accel(x, v, eye[j], zero) - drift for j in range(n)])
        tau_min = np.minimum(tau_min, minv @ bounds.tau_bar / bounds.tau_bar)
        dist_max = np.maximum(dist_max, np.abs(minv) @ bounds.d_bar)
    tol = 1e-9
    return BoundAudit(
        vm_max,
        tau_min,
        dist_max,
        bool(np.all(vm_max <= bounds.V_M_max + tol)),
        bool(np.all(tau_min >= bounds.m_lower - tol)),
        bool(np.all(dist_max <= bounds.m_i_lower * bounds.d_bar + tol)),
    )
