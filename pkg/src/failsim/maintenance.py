"""Inspection interval planning by cost-rate minimisation.

For an interval ``tau`` starting from initial degradation ``u`` the average
cost rate is

    CR(tau; u) = (C_I + C_R (1 - R(tau; u)) + C_rho E[rho]) / tau

with ``E[rho] = int_0^tau (1 - R(t; u)) dt`` the expected time the system
spends failed before the inspection at ``tau``.  One reliability curve (one
seed, one set of replications) serves every candidate ``tau``.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, NoOptimumError
from .model import FACILITATION, POISSON, CostModel, InitialAges, SystemSpec, failed_at_start
from .reliability import ReliabilityCurve, SimConfig, _trapezoid_upto, estimate_reliability_curve

log = logging.getLogger(__name__)

MODEL_MODES = {1: POISSON, 2: FACILITATION}


@dataclass(frozen=True)
class TauGrid:
    tau_min: float
    tau_max: float
    steps: int = 200
    refine: bool = False
    spacing: str = "log"

    def __post_init__(self):
        if not (0 < self.tau_min < self.tau_max) or not math.isfinite(self.tau_max):
            raise DomainError(f"need 0 < tau_min < tau_max, got {self.tau_min}, {self.tau_max}")
        if self.steps < 2:
            raise DomainError("tau grid needs at least 2 points")
        if self.spacing not in ("log", "linear"):
            raise DomainError(f"spacing must be 'log' or 'linear', got {self.spacing!r}")

    def points(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.tau_min, self.tau_max, self.steps)
        return np.linspace(self.tau_min, self.tau_max, self.steps)


@dataclass
class MaintenanceResult:
    ages: InitialAges
    mode: str
    taus: np.ndarray
    R: np.ndarray
    E_rho: np.ndarray
    CR: np.ndarray
    tau_star: float
    cr_star: float
    index: int
    failed_at_start: bool = False
    curve: Optional[ReliabilityCurve] = field(default=None, repr=False)

    @property
    def R_at_tau(self) -> float:
        return float(self.R[self.index])

    @property
    def E_rho_at_tau(self) -> float:
        return float(self.E_rho[self.index])


def _with_origin(curve: ReliabilityCurve, r0: Optional[float]):
    if curve.t[0] == 0:
        return curve.t, curve.R
    start = 1.0 if r0 is None else r0
    return np.concatenate(([0.0], curve.t)), np.concatenate(([start], curve.R))


def expected_downtime(curve: ReliabilityCurve, tau: float, r0: Optional[float] = None) -> float:
    """``int_0^tau (1 - R(t)) dt`` by the trapezoid rule on the curve grid.

    If the curve has no point at ``t = 0`` it is anchored at ``R(0) = r0``
    (default 1, i.e. the system works at the start of the interval).
    """
    t, R = _with_origin(curve, r0)
    if not (0 <= tau <= t[-1]):
        raise DomainError(f"tau={tau} outside curve range [0, {t[-1]}]")
    return max(0.0, _trapezoid_upto(t, 1.0 - R, tau))


def _downtime_on_grid(curve: ReliabilityCurve, r0: Optional[float]) -> np.ndarray:
    t, R = _with_origin(curve, r0)
    F = 1.0 - R
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (F[1:] + F[:-1]) * np.diff(t))))
    return np.maximum(cum[-curve.t.size:], 0.0)


def cost_rate(tau: float, curve: ReliabilityCurve, costs: CostModel, r0: Optional[float] = None) -> float:
    if not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    R = curve.at(tau)
    e_rho = expected_downtime(curve, tau, r0)
    return (costs.c_inspection + costs.c_replacement * (1.0 - R) + costs.c_downtime * e_rho) / tau


def _cost_rates(curve: ReliabilityCurve, costs: CostModel, r0: Optional[float]):
    e_rho = _downtime_on_grid(curve, r0)
    cr = (costs.c_inspection + costs.c_replacement * (1.0 - curve.R) + costs.c_downtime * e_rho) / curve.t
    return e_rho, cr


def _argmin(cr: np.ndarray) -> int:
    finite = np.isfinite(cr)
    if not finite.any():
        raise NoOptimumError("cost rate is not finite anywhere on the tau grid")
    # np.argmin returns the first occurrence, so ties go to the smaller tau
    return int(np.argmin(np.where(finite, cr, np.inf)))


def optimize_inspection(system: SystemSpec, ages: InitialAges, costs: CostModel, grid: TauGrid,
                        config: SimConfig) -> MaintenanceResult:
    """Grid search for the cost-rate minimising inspection interval.

    With ``grid.refine`` the two half-steps either side of the coarse
    minimiser are added and the curve is re-estimated on the same streams.
    """
    taus = grid.points()
    failed = bool(failed_at_start(system, ages))
    r0 = 0.0 if failed else 1.0
    cfg = dataclasses.replace(config, t_grid=tuple(taus))
    curve = estimate_reliability_curve(system, ages, cfg)
    e_rho, cr = _cost_rates(curve, costs, r0)
    if failed:
        # already failed: CR falls monotonically towards C_rho, but waiting
        # buys nothing, so the policy is to inspect (and replace) at once
        return MaintenanceResult(ages=ages, mode=system.mode, taus=taus, R=curve.R, E_rho=e_rho, CR=cr,
                                 tau_star=float(taus[0]), cr_star=float(cr[0]), index=0,
                                 failed_at_start=True, curve=curve)
    k = _argmin(cr)

    if grid.refine:
        extra = []
        if k > 0:
            extra.append(0.5 * (taus[k - 1] + taus[k]))
        if k < taus.size - 1:
            extra.append(0.5 * (taus[k] + taus[k + 1]))
        taus = np.unique(np.concatenate([taus, extra]))
        curve = estimate_reliability_curve(system, ages, dataclasses.replace(config, t_grid=tuple(taus)))
        e_rho, cr = _cost_rates(curve, costs, r0)
        k = _argmin(cr)

    return MaintenanceResult(ages=ages, mode=system.mode, taus=taus, R=curve.R, E_rho=e_rho, CR=cr,
                             tau_star=float(taus[k]), cr_star=float(cr[k]), index=k,
                             failed_at_start=failed, curve=curve)


@dataclass
class SweepEntry:
    scenario: int
    model: int
    ages: InitialAges
    result: Optional[MaintenanceResult] = None
    error: Optional[str] = None


def scenario_sweep(system: SystemSpec, scenarios: Sequence[InitialAges], costs: CostModel, grid: TauGrid,
                   config: SimConfig, models: Sequence[int] = (1, 2), threads: int = 1) -> list:
    """Optimise every scenario under each requested model.

    All runs share the master seed in ``config``; a failing scenario is
    recorded in its entry's ``error`` and the sweep carries on.  Entries are
    ordered by (scenario, model) whatever the thread count.
    """
    if not scenarios:
        raise DomainError("need at least one scenario")
    jobs = [(s, m) for s in range(len(scenarios)) for m in models]
    inner = dataclasses.replace(config, threads=1) if threads > 1 else config

    def run(job):
        s, m = job
        ages = scenarios[s]
        try:
            res = optimize_inspection(system.with_mode(MODEL_MODES[m]), ages, costs, grid, inner)
            return SweepEntry(s + 1, m, ages, res)
        except Exception as exc:  # isolate per-scenario failures
            log.error("scenario %d model %d failed: %s", s + 1, m, exc)
            return SweepEntry(s + 1, m, ages, error=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]
