"""Domain model: components, series systems, initial ages and costs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, ValidationError
from .stochastic import FacilitationParams, GammaProcessParams, NormalParams

POISSON = "poisson"
FACILITATION = "facilitation"
MODES = (POISSON, FACILITATION)

# Probabilities this close to 0 or 1 are snapped to the endpoint.
PROB_CLAMP = 1e-15


def clamp_probability(p: float) -> float:
    if p < PROB_CLAMP:
        return 0.0
    if p > 1.0 - PROB_CLAMP:
        return 1.0
    return p


@dataclass(frozen=True)
class ComponentSpec:
    """One component: soft threshold ``H`` on total degradation, hard
    threshold ``D`` on single shock magnitude.

    ``shock_damage=None`` means shocks add no degradation.
    """

    name: str
    H: float
    D: float
    degradation: GammaProcessParams
    shock_magnitude: NormalParams
    shock_damage: Optional[NormalParams]


@dataclass(frozen=True)
class SystemSpec:
    """Series system sharing one shock arrival process."""

    components: tuple
    shock_model: FacilitationParams
    mode: str = FACILITATION

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def effective_shock_model(self) -> FacilitationParams:
        """Shock parameters actually in force; Poisson mode zeroes eta and gamma."""
        if self.mode == POISSON:
            return FacilitationParams(self.shock_model.lambda0, 0.0, 0.0)
        return self.shock_model

    def with_mode(self, mode: str) -> "SystemSpec":
        return SystemSpec(self.components, self.shock_model, mode)


@dataclass(frozen=True)
class InitialAges:
    """Degradation level of each component at the start of an interval."""

    u: tuple

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(v) for v in self.u))

    def __len__(self):
        return len(self.u)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.u, dtype=float)


@dataclass(frozen=True)
class CostModel:
    c_inspection: float
    c_replacement: float
    c_downtime: float

    def scaled(self, factor: float) -> "CostModel":
        return CostModel(self.c_inspection * factor, self.c_replacement * factor, self.c_downtime * factor)


@dataclass(frozen=True)
class Bundle:
    system: SystemSpec
    ages: InitialAges
    costs: CostModel
    warnings: tuple = field(default=())


def no_hard_failure_prob(component: ComponentSpec) -> float:
    """P(W < D) for a single shock magnitude, clamped near 0 and 1."""
    w = component.shock_magnitude
    if not (w.std > 0):
        raise DomainError("shock magnitude std must be > 0")
    return clamp_probability(float(special.ndtr((component.D - w.mean) / w.std)))


def failed_at_start(system: SystemSpec, ages: InitialAges) -> list:
    """Indices of components whose initial degradation already reaches H."""
    return [i for i, (c, u) in enumerate(zip(system.components, ages.u)) if u >= c.H]


def ages_from_elapsed_time(system: SystemSpec, elapsed: Sequence[float]) -> InitialAges:
    """Approximate initial degradation by the gamma-process mean after
    ``elapsed`` time units of pure degradation (ignores shocks)."""
    if len(elapsed) != system.n:
        raise DomainError(f"expected {system.n} elapsed times, got {len(elapsed)}")
    return InitialAges(tuple(float(c.degradation.mean_at(a)) for c, a in zip(system.components, elapsed)))


def _finite_positive(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v) and v > 0


def system_violations(system: SystemSpec, ages: InitialAges, costs: CostModel) -> list:
    """Every invariant violation as ``(field_path, message)``; empty when valid."""
    out = []
    if system.mode not in MODES:
        out.append(("system.mode", f"must be one of {MODES}, got {system.mode!r}"))
    if not isinstance(system.shock_model, FacilitationParams):
        out.append(("system", "shock model missing"))
    if system.n < 1:
        out.append(("components", "at least one component is required"))
    names = [c.name for c in system.components]
    for i, c in enumerate(system.components):
        p = f"components[{i}]"
        if not _finite_positive(c.H):
            out.append((f"{p}.H", f"soft threshold must be > 0, got {c.H!r}"))
        if not _finite_positive(c.D):
            out.append((f"{p}.D", f"hard threshold must be > 0, got {c.D!r}"))
        if not isinstance(c.degradation, GammaProcessParams):
            out.append((f"{p}.degradation", "gamma process parameters missing"))
        if not isinstance(c.shock_magnitude, NormalParams):
            out.append((f"{p}.shock_magnitude", "shock magnitude parameters missing"))
        if names.count(c.name) > 1:
            out.append((f"{p}.name", f"duplicate component name {c.name!r}"))
    if len(ages.u) != system.n:
        out.append(("ages.u", f"dimension mismatch: {len(ages.u)} ages for {system.n} components"))
    for i, u in enumerate(ages.u):
        if not (math.isfinite(u) and u >= 0):
            out.append((f"components[{i}].u", f"initial age must be finite and >= 0, got {u!r}"))
    cvals = {"costs.c_i": costs.c_inspection, "costs.c_r": costs.c_replacement, "costs.c_rho": costs.c_downtime}
    for path, v in cvals.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
            out.append((path, f"cost must be finite and >= 0, got {v!r}"))
    if all(isinstance(v, (int, float)) and v == 0 for v in cvals.values()):
        out.append(("costs", "at least one cost must be > 0"))
    return out


def validate_system(system: SystemSpec, ages: InitialAges, costs: CostModel) -> Bundle:
    """Check all invariants and return the bundle; raises :class:`ValidationError`
    listing every violation otherwise.  Components already at or past their
    threshold are valid and reported in ``Bundle.warnings``."""
    violations = system_violations(system, ages, costs)
    if violations:
        raise ValidationError(violations)
    warnings = tuple(f"components[{i}] already failed (u >= H)" for i in failed_at_start(system, ages))
    return Bundle(system, ages, costs, warnings)
