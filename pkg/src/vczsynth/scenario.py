"""Scenario files: YAML documents validated by a strict, versioned schema."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .confinement import (
    FeasibilityBounds,
    FunnelParams,
    PsiConfig,
    VczParams,
    a_r_bound,
    solve_least_conservative,
    solve_most_efficient,
)
from .errors import ContractViolation, ScenarioError, VczError
from .geometry import IntervalBox
from .plants import DisturbanceSpec, make_plant
from .sim import InitialState, Scenario, SimConfig
from .specification import RasSequence, RasTask, Separation

Vector = Union[float, List[float]]
Bounds = List[List[float]]

log = logging.getLogger(__name__)

AUTO_ME = "auto:most-efficient"
AUTO_LC = "auto:least-conservative"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PlantSection(_Strict):
    name: Literal["pendulum", "scara2", "agents2x2d"]
    params: Dict[str, float] = Field(default_factory=dict)


class BoundsSection(_Strict):
    m_lower: float
    m_i_lower: float
    V_M_max: Vector
    d_bar: Vector
    v_bar: Vector
    tau_bar: Vector


class FunnelSection(_Strict):
    p_v: Vector
    q_v: Vector
    mu_v: Vector


class PsiSection(_Strict):
    a: float = 1.8
    variant: Literal["smooth", "exact"] = "smooth"


class VczSection(_Strict):
    lam: Union[float, Literal["auto:most-efficient", "auto:least-conservative"]]
    u_bar: Optional[Vector] = None
    h: float
    eta: Vector
    inputs_per_axis: int = 3
    grid_domain: Union[Literal["stay", "tightened"], Bounds] = "tightened"


class SeparationSection(_Strict):
    axes_a: List[int]
    axes_b: List[int]
    distance: float


class TaskSection(_Strict):
    goal: List[Bounds] = Field(default_factory=list)
    obstacles: List[Bounds] = Field(default_factory=list)
    separations: List[SeparationSection] = Field(default_factory=list)


class TasksSection(_Strict):
    stay: Bounds
    sequence: List[TaskSection]


class DisturbanceSection(_Strict):
    kind: Literal["zero", "sinusoidal", "uniform-random"] = "zero"
    amplitude: Vector = 0.0
    frequency: Vector = 1.0
    phase: Vector = 0.0


class SimSection(_Strict):
    dt: Optional[float] = None
    duration: float
    seed: int = 0


class InitialSection(_Strict):
    x0: Vector
    v0: Optional[Vector] = None
    xi0: Optional[Vector] = None


class ScenarioFile(_Strict):
    schema_: Literal[1] = Field(alias="schema")
    name: str
    plant: PlantSection
    bounds: BoundsSection
    funnel: FunnelSection
    psi: PsiSection = Field(default_factory=PsiSection)
    vcz: VczSection
    tasks: TasksSection
    disturbance: DisturbanceSection = Field(default_factory=DisturbanceSection)
    sim: SimSection
    initial: InitialSection

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @field_validator("name")
    @classmethod
    def _name(cls, v):
        if not v.strip():
            raise ValueError("name must be non-empty")
        return v


def parse_scenario_text(text: str) -> ScenarioFile:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"YAML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario document must be a mapping")
    try:
        return ScenarioFile.model_validate(raw)
    except ValidationError as exc:
        raise ScenarioError(f"scenario schema error:\n{exc}") from exc


def normalized(doc: ScenarioFile) -> dict:
    """Canonical plain-data form (round-trips through :func:`parse_scenario_text`)."""
    return doc.model_dump(by_alias=True, mode="json")


def dump_scenario(doc: ScenarioFile) -> str:
    return yaml.safe_dump(normalized(doc), sort_keys=True)


def _box(bounds) -> IntervalBox:
    return IntervalBox.from_bounds(bounds)


def resolve_vcz(doc: ScenarioFile, bounds: FeasibilityBounds, fp: FunnelParams):
    """Explicit radius, or one of the two parameter-selection strategies."""
    v = doc.vcz
    if v.lam == AUTO_ME:
        lam, u = solve_most_efficient(bounds, fp)
        return VczParams(lam, u, v.h, v.eta), AUTO_ME
    if v.lam == AUTO_LC:
        if v.u_bar is None:
            raise ScenarioError("auto:least-conservative needs vcz.u_bar")
        u = np.broadcast_to(np.asarray(v.u_bar, dtype=float), bounds.v_bar.shape)
        budget = bounds.torque_budget(fp)
        # Smallest lambda whose a_r bound fits the budget at the requested speed.
        lam = float(np.max(a_r_bound(bounds.v_bar, u, 1.0) / budget))
        lc = solve_least_conservative(bounds, fp)
        return VczParams(max(lam, lc.lam_min), u, v.h, v.eta), AUTO_LC
    if v.u_bar is None:
        raise ScenarioError("explicit vcz.lam needs vcz.u_bar")
    return VczParams(float(v.lam), v.u_bar, v.h, v.eta), "explicit"


def build_scenario(doc: ScenarioFile, seed_override: Optional[int] = None, dt: Optional[float] = None) -> Scenario:
    try:
        plant = make_plant(doc.plant.name, doc.plant.params)
        b = doc.bounds
        bounds = FeasibilityBounds(
            b.m_lower, b.m_i_lower,
            np.broadcast_to(np.asarray(b.V_M_max, dtype=float), (plant.n,)).copy(),
            np.broadcast_to(np.asarray(b.d_bar, dtype=float), (plant.n,)).copy(),
            np.broadcast_to(np.asarray(b.v_bar, dtype=float), (plant.n,)).copy(),
            np.broadcast_to(np.asarray(b.tau_bar, dtype=float), (plant.n,)).copy(),
        )
        fp = FunnelParams(doc.funnel.p_v, doc.funnel.q_v, doc.funnel.mu_v).broadcast(plant.n)
        vcz, mode = resolve_vcz(doc, bounds, fp)
        vcz = VczParams(vcz.lam, np.broadcast_to(vcz.u_bar, (plant.n,)).copy(), vcz.h,
                        np.broadcast_to(np.asarray(vcz.eta), (plant.n,)).copy())
        stay = _box(doc.tasks.stay)
        tasks = [
            RasTask(
                [_box(g) for g in t.goal],
                [_box(o) for o in t.obstacles],
                stay,
                [Separation(s.axes_a, s.axes_b, s.distance) for s in t.separations],
            )
            for t in doc.tasks.sequence
        ]
        seq = RasSequence(tasks)
        if seq.dim != plant.n:
            raise ScenarioError(f"task dimension {seq.dim} does not match plant dimension {plant.n}")
        d = doc.disturbance
        dist = DisturbanceSpec(d.kind, d.amplitude, d.frequency, d.phase).broadcast(plant.n)
        sim = SimConfig(dt if dt is not None else doc.sim.dt, doc.sim.duration,
                        doc.sim.seed if seed_override is None else int(seed_override))
        ini = doc.initial
        initial = InitialState(np.asarray(ini.x0, dtype=float),
                               None if ini.v0 is None else np.asarray(ini.v0, dtype=float),
                               None if ini.xi0 is None else np.asarray(ini.xi0, dtype=float))
        gd = doc.vcz.grid_domain
        grid_domain = gd if isinstance(gd, str) else _box(gd)
        scn = Scenario(doc.name, plant, bounds, fp, vcz, seq, dist, sim, initial,
                       PsiConfig(doc.psi.a, doc.psi.variant), doc.vcz.inputs_per_axis, grid_domain, mode)
        # Checked at load so an infeasible file is flagged before any synthesis;
        # the feasibility command still reports it in full.
        rep = scn.feasibility()
        if not rep.passed:
            log.warning("scenario %r fails the confinement inequalities: %s", doc.name, rep.as_dict())
        return scn
    except ScenarioError:
        raise
    except (ContractViolation, ValueError) as exc:
        raise ScenarioError(f"invalid scenario values: {exc}") from exc


def load_scenario(path, seed_override: Optional[int] = None, dt: Optional[float] = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return build_scenario(parse_scenario_text(text), seed_override, dt)


__all__ = [
    "ScenarioFile",
    "parse_scenario_text",
    "build_scenario",
    "load_scenario",
    "dump_scenario",
    "normalized",
    "VczError",
]
