"""Conditional reliability of series systems under degradation and shocks.

Two routes are provided:

* closed form (``system_reliability_closed``) for shock processes whose count
  distribution does not depend on the degradation path (``gamma == 0``);
* a Monte Carlo engine (``estimate_reliability_curve``) in which every
  replication samples pure degradation paths, damage totals and shock times,
  integrates the degradation-driven baseline intensity, and weights the
  per-count survival factors by the resulting count probabilities.

The survival factor for ``m`` shocks,
``prod_i F_Wi(D_i)^m * E[G_i(H_i - u_i - Y_i^<m>; t)]``, depends only on
``(t, m)`` and is shared by both routes.
"""
from __future__ import annotations

import functools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, UnsupportedModeError
from .model import ComponentSpec, InitialAges, SystemSpec, failed_at_start, no_hard_failure_prob
from .stochastic import FacilitationParams, count_pmf, count_tail_mass, expect_damage_sum, gamma_cdf

log = logging.getLogger(__name__)

CLOSED_FORM = "closed-form"
MONTE_CARLO = "monte-carlo"

# Replications per work unit.  Fixed so results do not depend on thread count.
BLOCK_SIZE = 250
_TINY = 2.0 ** -60


@dataclass(frozen=True)
class SimConfig:
    replications: int
    max_shocks: int
    t_grid: tuple
    seed: int = 0
    path_steps: int = 1000
    truncation_tol: float = 1e-6
    renormalize_pmf: bool = False
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.max_shocks < 1:
            raise DomainError("max_shocks must be >= 1")
        if self.path_steps < 1:
            raise DomainError("path_steps must be >= 1")
        if not (0 < self.truncation_tol < 1):
            raise DomainError("truncation_tol must lie in (0, 1)")
        t = np.asarray(self.t_grid)
        if t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
            raise DomainError("t_grid must be nonempty, finite, strictly increasing and > 0")

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.t_grid)


@dataclass
class ReliabilityCurve:
    t: np.ndarray
    R: np.ndarray
    stderr: np.ndarray
    method: str
    seed: Optional[int] = None
    N: int = 0
    diagnostics: dict = field(default_factory=dict)

    def at(self, t: float) -> float:
        """Linear interpolation of R inside the grid."""
        if t < self.t[0] or t > self.t[-1]:
            raise DomainError(f"t={t} outside curve grid [{self.t[0]}, {self.t[-1]}]")
        return float(np.interp(t, self.t, self.R))


@dataclass
class DegradationPath:
    """Pure degradation of every component on a shared time grid plus one
    shock scenario (arrival times and per-component damages)."""

    times: np.ndarray
    pure: np.ndarray  # (n, len(times))
    u: np.ndarray  # (n,)
    shock_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    damages: Optional[np.ndarray] = None  # (n, len(shock_times))

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.pure = np.atleast_2d(np.asarray(self.pure, dtype=float))
        self.u = np.asarray(self.u, dtype=float)
        self.shock_times = np.asarray(self.shock_times, dtype=float)
        if self.damages is None:
            self.damages = np.zeros((self.pure.shape[0], self.shock_times.size))
        self.damages = np.asarray(self.damages, dtype=float).reshape(self.pure.shape[0], self.shock_times.size)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def pure_at(self, v):
        return np.array([np.interp(v, self.times, x) for x in self.pure])

    def component_totals(self, v):
        """X_Si(v) = X_i(v) + sum of damages received by v + u_i."""
        v = np.asarray(v, dtype=float)
        hit = (self.shock_times[:, None] <= np.atleast_1d(v)[None, :]).astype(float)
        jumps = self.damages @ hit
        out = self.pure_at(np.atleast_1d(v)) + jumps + self.u[:, None]
        return out if v.ndim else out[:, 0]

    def surrogate(self, v):
        """System degradation X_S(v) = sum_i X_Si(v)."""
        return np.sum(self.component_totals(v), axis=0)


def _trapezoid_upto(times: np.ndarray, values: np.ndarray, t: float) -> float:
    """Trapezoid integral of the piecewise-linear interpolant on [times[0], t]."""
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 1)
    head = np.sum(0.5 * (values[1:k + 1] + values[:k]) * np.diff(times[:k + 1])) if k > 0 else 0.0
    if t > times[k]:
        vt = np.interp(t, times, values)
        head += 0.5 * (values[k] + vt) * (t - times[k])
    return float(head)


def integrate_baseline_intensity(path: DegradationPath, params: FacilitationParams, t: float) -> float:
    """Accumulated baseline intensity ``int_0^t (lambda0 + gamma X_S(v)) dv``.

    The trapezoid rule runs on the path grid refined by the shock times, so
    the step changes from shock damages are integrated exactly.
    """
    if not (0 <= t <= path.horizon):
        raise DomainError(f"t={t} outside path horizon [0, {path.horizon}]")
    if params.gamma == 0:
        return params.lambda0 * t
    cont = _trapezoid_upto(path.times, path.pure.sum(axis=0), t)
    hit = path.shock_times <= t
    jumps = float(np.sum((t - path.shock_times[hit]) * path.damages[:, hit].sum(axis=0)))
    return params.lambda0 * t + params.gamma * (float(path.u.sum()) * t + cont + jumps)


# ---------------------------------------------------------------------------
# Survival factors
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def _component_survival(comp: ComponentSpec, u: float, t_grid: tuple, max_shocks: int) -> np.ndarray:
    """``F_W(D)^m * E[G(H - u - Y^<m>; t)]`` for every grid time and m = 0..M."""
    t = np.asarray(t_grid)
    out = np.zeros((t.size, max_shocks + 1))
    room = comp.H - u
    if room <= 0:
        out.flags.writeable = False
        return out
    shape = comp.degradation.shape_at(t)
    beta = comp.degradation.beta
    p_nh = no_hard_failure_prob(comp)

    def g(y):
        return gamma_cdf(room - y, shape, beta)

    for m in range(max_shocks + 1):
        if m > 0 and p_nh == 0.0:
            break
        integral = expect_damage_sum(g, m, comp.shock_damage, upper=room)
        out[:, m] = np.clip(integral, 0.0, 1.0) * p_nh ** m
        if comp.shock_damage is None:
            # damage-free: only the hard-failure factor changes with m
            out[:, m + 1:] = out[:, [m]] * p_nh ** np.arange(1, max_shocks - m + 1)
            break
    out.flags.writeable = False
    return out


def survival_factors(system: SystemSpec, ages: InitialAges, t_grid: Sequence[float], max_shocks: int) -> np.ndarray:
    """System survival factor for exactly m shocks, shape ``(len(t_grid), M + 1)``."""
    key = tuple(float(t) for t in t_grid)
    out = np.ones((len(key), max_shocks + 1))
    for comp, u in zip(system.components, ages.u):
        out = out * _component_survival(comp, float(u), key, max_shocks)
    return out


def truncation_bound(system: SystemSpec, ages: InitialAges, t_grid, max_shocks: int) -> float:
    """Heuristic bound on the reliability mass dropped by truncating at M shocks.

    The smaller of (a) the count tail beyond M with the baseline intensity
    bounded by ``lambda0 t + gamma t sum_i H_i`` and (b) the survival factor
    bound ``prod_i F_Wi^(M+1) P(Y_i^<M+1> < H_i - u_i)``, which decreases in
    m once damages have positive mean.
    """
    if failed_at_start(system, ages):
        return 0.0
    m1 = max_shocks + 1
    damage_bound = 1.0
    for comp, u in zip(system.components, ages.u):
        f = no_hard_failure_prob(comp) ** m1
        y = comp.shock_damage
        if y is not None and y.mean > 0:
            f *= float(special.ndtr((comp.H - u - m1 * y.mean) / (y.std * math.sqrt(m1))))
        damage_bound *= f
    sm = system.effective_shock_model
    h_sum = sum(c.H for c in system.components)
    worst = 0.0
    for t in np.atleast_1d(t_grid):
        lam_up = sm.lambda0 * t + sm.gamma * h_sum * t
        worst = max(worst, min(count_tail_mass(max_shocks, lam_up, sm.eta), damage_bound))
    return worst


def _damage_free(system: SystemSpec) -> bool:
    return all(c.shock_damage is None for c in system.components)


def _pgf(c: float, Lambda0, eta: float):
    """E[c^N] for the facilitation count law."""
    Lambda0 = np.asarray(Lambda0, dtype=float)
    if eta == 0:
        return np.exp(-Lambda0 * (1.0 - c))
    q = np.exp(-eta * Lambda0)
    return (q / (1.0 - c * (1.0 - q))) ** (1.0 / eta)


# ---------------------------------------------------------------------------
# Closed form
# ---------------------------------------------------------------------------


def component_reliability_closed(t: float, u_i: float, comp: ComponentSpec, pmf) -> float:
    """Survival of one component given a path-independent count pmf over m = 0..M."""
    if u_i >= comp.H:
        return 0.0
    pmf = np.asarray(pmf, dtype=float)
    s = _component_survival(comp, float(u_i), (float(t),), pmf.size - 1)[0]
    return float(min(1.0, max(0.0, math.fsum(s * pmf))))


def system_reliability_closed(t, ages: InitialAges, system: SystemSpec, max_shocks: int = 50):
    """Series-system reliability at time(s) ``t`` when the count law does not
    depend on degradation (Poisson mode, or facilitation with gamma == 0)."""
    sm = system.effective_shock_model
    if sm.gamma > 0:
        raise UnsupportedModeError("gamma > 0 makes shock counts path dependent; "
                                   "use estimate_reliability_curve")
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if failed_at_start(system, ages):
        out = np.zeros(tt.size)
        return float(out[0]) if scalar else out
    m = np.arange(max_shocks + 1)
    pmf = count_pmf(m[None, :], sm.lambda0 * tt[:, None], sm.eta)
    s = survival_factors(system, ages, tt, max_shocks)
    out = np.clip(np.sum(s * pmf, axis=1), 0.0, 1.0)
    return float(out[0]) if scalar else out


def closed_form_curve(system: SystemSpec, ages: InitialAges, config: SimConfig) -> ReliabilityCurve:
    R = system_reliability_closed(config.times, ages, system, config.max_shocks)
    return ReliabilityCurve(config.times.copy(), R, np.zeros_like(R), CLOSED_FORM, None, 0)


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass
class _Draws:
    """Random inputs of a block of replications."""

    path_x: np.ndarray  # (B, n, P+1) pure degradation on the path grid
    z: np.ndarray  # (B, n, M) standard normal damage draws
    u01: np.ndarray  # (B, M) shock time fractions


def _draw_replication(rng: np.random.Generator, system: SystemSpec, horizon: float, steps: int, max_shocks: int):
    dt = horizon / steps
    xs = []
    for comp in system.components:
        shape = float(comp.degradation.shape_at(dt))
        inc = rng.standard_gamma(shape, size=steps) / comp.degradation.beta
        xs.append(np.concatenate(([0.0], np.cumsum(inc))))
    # one row per shock index, so raising max_shocks only appends shocks
    a = rng.random((max_shocks, system.n + 1))
    z = special.ndtri(np.maximum(a[:, :system.n], _TINY)).T
    return np.stack(xs), z, a[:, system.n]


def _draw_block(system, config, horizon, indices) -> _Draws:
    parts = [_draw_replication(replication_rng(config.seed, j), system, horizon, config.path_steps,
                               config.max_shocks) for j in indices]
    return _Draws(np.stack([p[0] for p in parts]), np.stack([p[1] for p in parts]), np.stack([p[2] for p in parts]))


def _baseline_intensity(draws: _Draws, system: SystemSpec, ages: InitialAges, times: np.ndarray,
                        path_grid: np.ndarray) -> np.ndarray:
    """Lambda0 for every replication, grid time and shock count m: (B, T, M+1).

    Shocks for count m sit at ``t * U_1..U_m`` and the pure path is linearly
    interpolated between grid nodes, matching :func:`integrate_baseline_intensity`.
    """
    sm = system.effective_shock_model
    B = draws.path_x.shape[0]
    M = draws.z.shape[2]
    lam = np.broadcast_to(sm.lambda0 * times[None, :, None], (B, times.size, M + 1))
    if sm.gamma == 0:
        return np.array(lam)
    total = draws.path_x.sum(axis=1)  # (B, P+1)
    dtg = np.diff(path_grid)
    cum = np.concatenate([np.zeros((B, 1)), np.cumsum(0.5 * (total[:, 1:] + total[:, :-1]) * dtg, axis=1)], axis=1)
    k = np.clip(np.searchsorted(path_grid, times, side="right") - 1, 0, path_grid.size - 2)
    frac = (times - path_grid[k]) / dtg[k]
    x_t = total[:, k] + frac * (total[:, k + 1] - total[:, k])
    pure_int = cum[:, k] + 0.5 * (total[:, k] + x_t) * (times - path_grid[k])  # (B, T)

    ysum = np.zeros((B, M))
    for i, comp in enumerate(system.components):
        if comp.shock_damage is not None:
            ysum += comp.shock_damage.mean + comp.shock_damage.std * draws.z[:, i, :]
    jump = np.concatenate([np.zeros((B, 1)), np.cumsum((1.0 - draws.u01) * ysum, axis=1)], axis=1)  # (B, M+1)

    u_sum = float(ages.as_array().sum())
    cont = u_sum * times[None, :] + pure_int  # (B, T)
    return lam + sm.gamma * (cont[:, :, None] + times[None, :, None] * jump[:, None, :])


def _evaluate_block(draws: _Draws, system: SystemSpec, ages: InitialAges, config: SimConfig,
                    surv: np.ndarray, path_grid: np.ndarray):
    """Per-replication reliability (B, T) and the max |1 - sum pmf| residual."""
    sm = system.effective_shock_model
    times = config.times
    lam = _baseline_intensity(draws, system, ages, times, path_grid)
    if _damage_free(system):
        # exact infinite sum: survival factor is G(t) * c^m
        c = float(np.prod([no_hard_failure_prob(comp) for comp in system.components]))
        r = surv[None, :, 0] * _pgf(c, lam[:, :, 0], sm.eta)
        return np.clip(r, 0.0, 1.0), 0.0
    m = np.arange(config.max_shocks + 1)
    pmf = count_pmf(m[None, None, :], lam, sm.eta)
    mass = pmf.sum(axis=2)
    r = np.einsum("btm,tm->bt", pmf, surv)
    if config.renormalize_pmf:
        r = r / np.where(mass > 0, mass, 1.0)
    residual = float(np.max(np.abs(1.0 - mass)))
    over = float(np.max(r - 1.0, initial=0.0))
    if over > 0 or np.any(r < 0):
        log.debug("clamped replication reliability; max excess over 1 = %.3g", over)
    return np.clip(r, 0.0, 1.0), residual


def _path_grid(config: SimConfig) -> np.ndarray:
    return np.linspace(0.0, config.times[-1], config.path_steps + 1)


def replication_reliability(system: SystemSpec, ages: InitialAges, config: SimConfig,
                            rng: np.random.Generator) -> np.ndarray:
    """One replication's conditional reliability at every grid time."""
    times = config.times
    if failed_at_start(system, ages):
        return np.zeros(times.size)
    surv = survival_factors(system, ages, times, config.max_shocks)
    x, z, u01 = _draw_replication(rng, system, times[-1], config.path_steps, config.max_shocks)
    draws = _Draws(x[None], z[None], u01[None])
    r, _ = _evaluate_block(draws, system, ages, config, surv, _path_grid(config))
    return r[0]


def default_threads() -> int:
    env = os.environ.get("FAILSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer FAILSIM_THREADS=%r", env)
    return 1


def estimate_reliability_curve(system: SystemSpec, ages: InitialAges, config: SimConfig,
                               keep_replications: bool = False) -> ReliabilityCurve:
    """Average replication reliability over ``config.replications`` streams.

    Replication ``j`` always uses the stream keyed by ``(seed, j)``, so the
    result is identical for any thread count, and two systems evaluated with
    the same seed share their random inputs.
    """
    times = config.times
    N = config.replications
    diagnostics = {"truncation_bound": truncation_bound(system, ages, times, config.max_shocks)}
    if diagnostics["truncation_bound"] >= config.truncation_tol and not _damage_free(system):
        raise DomainError(f"max_shocks={config.max_shocks} leaves up to {diagnostics['truncation_bound']:.3g} "
                          f"of reliability mass untracked (tolerance {config.truncation_tol}); "
                          "increase max_shocks")
    if failed_at_start(system, ages):
        z = np.zeros(times.size)
        diagnostics.update(pmf_residual_max=0.0, failed_at_start=True)
        return ReliabilityCurve(times.copy(), z, z.copy(), MONTE_CARLO, config.seed, N, diagnostics)

    surv = survival_factors(system, ages, times, config.max_shocks)
    grid = _path_grid(config)
    blocks = [range(s, min(s + BLOCK_SIZE, N)) for s in range(0, N, BLOCK_SIZE)]

    def work(idx):
        draws = _draw_block(system, config, times[-1], idx)
        return _evaluate_block(draws, system, ages, config, surv, grid)

    threads = max(1, int(config.threads))
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]

    reps = np.concatenate([r for r, _ in results], axis=0)
    residual = max(res for _, res in results)
    if residual > config.truncation_tol:
        log.info("count pmf over m <= %d deviates from 1 by up to %.3g (not renormalized=%s)",
                 config.max_shocks, residual, not config.renormalize_pmf)
    diagnostics["pmf_residual_max"] = residual
    R = reps.mean(axis=0)
    se = reps.std(axis=0, ddof=1) / math.sqrt(N) if N > 1 else np.zeros(times.size)
    if keep_replications:
        diagnostics["replications"] = reps
    return ReliabilityCurve(times.copy(), np.clip(R, 0.0, 1.0), se, MONTE_CARLO, config.seed, N, diagnostics)
