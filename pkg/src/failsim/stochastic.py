"""Distributions and stochastic processes used by the reliability engine.

Conventions
-----------
Gamma processes use the *rate* parameterisation: an increment over a time
span ``dt`` has density ``beta**k x**(k-1) exp(-beta x) / Gamma(k)`` with
shape ``k = alpha * dt / time_unit``.  A scale parameter ``theta`` converts
as ``beta = 1 / theta``.

``time_unit`` lets the degradation clock run in different units from the
shock clock (e.g. ``alpha`` per 10^4 hours while ``lambda0`` is per hour).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConvergenceError, DegenerateDataError, DomainError

# Half-width of the quadrature window around a normal sum, in standard deviations.
NORMAL_SUPPORT_SD = 8.0


@dataclass(frozen=True)
class GammaProcessParams:
    alpha: float
    beta: float
    time_unit: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "time_unit"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")

    def shape_at(self, t):
        """Gamma shape accumulated over elapsed time ``t``."""
        return self.alpha * np.asarray(t, dtype=float) / self.time_unit

    def mean_at(self, t):
        return self.shape_at(t) / self.beta


@dataclass(frozen=True)
class NormalParams:
    mean: float
    std: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise DomainError(f"mean must be finite, got {self.mean!r}")
        if not (math.isfinite(self.std) and self.std > 0):
            raise DomainError(f"std must be finite and > 0, got {self.std!r}")


@dataclass(frozen=True)
class FacilitationParams:
    """Shock arrival intensity ``(1 + eta*i) * (lambda0 + gamma * X_S(t))``
    after ``i`` arrivals.  ``eta = gamma = 0`` is a homogeneous Poisson process."""

    lambda0: float
    eta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lambda0) and self.lambda0 > 0):
            raise DomainError(f"lambda0 must be finite and > 0, got {self.lambda0!r}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise DomainError(f"eta must be finite and >= 0, got {self.eta!r}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise DomainError(f"gamma must be finite and >= 0, got {self.gamma!r}")

    @property
    def is_poisson(self) -> bool:
        return self.eta == 0 and self.gamma == 0


@dataclass(frozen=True)
class IncrementObservation:
    dt: float
    dx: float

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be finite and > 0, got {self.dt!r}")
        if not (math.isfinite(self.dx) and self.dx >= 0):
            raise DomainError(f"dx must be finite and >= 0, got {self.dx!r}")


# ---------------------------------------------------------------------------
# Gamma process
# ---------------------------------------------------------------------------


def _check_shape_rate(shape, rate):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if not (np.all(np.isfinite(shape)) and np.all(shape > 0)):
        raise DomainError("gamma shape must be finite and > 0")
    if not (np.all(np.isfinite(rate)) and np.all(rate > 0)):
        raise DomainError("gamma rate must be finite and > 0")
    return shape, rate


def gamma_cdf(x, shape, rate):
    """P(X <= x) for X ~ Gamma(shape, rate); zero for ``x <= 0``.

    Accepts scalars or broadcastable arrays and returns the same shape.
    """
    shape, rate = _check_shape_rate(shape, rate)
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("x must not be NaN")
    z = np.where(x > 0, rate * np.where(x > 0, x, 0.0), 0.0)
    out = special.gammainc(shape, z)
    out = np.where(x > 0, out, 0.0)
    return out if out.ndim else float(out)


def gamma_pdf(x, shape, rate):
    shape, rate = _check_shape_rate(shape, rate)
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xs = np.where(pos, x, 1.0)
    logp = shape * np.log(rate) + special.xlogy(shape - 1, xs) - rate * xs - special.gammaln(shape)
    out = np.where(pos, np.exp(logp), 0.0)
    return out if out.ndim else float(out)


def sample_gamma_path(params: GammaProcessParams, horizon: float, steps: int, rng: np.random.Generator):
    """Sample one gamma-process path on a uniform grid.

    Returns ``(times, values)`` with ``steps + 1`` points and ``values[0] == 0``.
    A zero horizon yields the single point ``X(0) = 0``.
    """
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    if not (math.isfinite(horizon) and horizon >= 0):
        raise DomainError(f"horizon must be finite and >= 0, got {horizon!r}")
    if horizon == 0:
        return np.zeros(1), np.zeros(1)
    times = np.linspace(0.0, horizon, steps + 1)
    shape = float(params.shape_at(horizon / steps))
    inc = rng.standard_gamma(shape, size=steps) / params.beta
    values = np.concatenate(([0.0], np.cumsum(inc)))
    return times, values


# ---------------------------------------------------------------------------
# Shock damage sums
# ---------------------------------------------------------------------------


def damage_sum_density(m: int, damage: NormalParams, y):
    """Density of the sum of ``m`` iid damages at ``y``.

    Returns ``(density, point_mass)``.  For ``m == 0`` the sum is identically
    zero: ``point_mass`` is True and ``density`` is 0 (use
    :func:`expect_damage_sum` to integrate against it).
    """
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    y = np.asarray(y, dtype=float)
    if m == 0:
        d = np.zeros_like(y)
        return (d if d.ndim else 0.0), True
    sd = damage.std * math.sqrt(m)
    z = (y - m * damage.mean) / sd
    d = np.exp(-0.5 * z * z) / (sd * math.sqrt(2 * math.pi))
    return (d if d.ndim else float(d)), False


def damage_sum_support(m: int, damage: NormalParams) -> tuple[float, float]:
    """Interval carrying all but ~1e-15 of the mass of an m-fold damage sum."""
    if m == 0:
        return 0.0, 0.0
    half = NORMAL_SUPPORT_SD * math.sqrt(m) * damage.std
    return m * damage.mean - half, m * damage.mean + half


def expect_damage_sum(g: Callable, m: int, damage: NormalParams | None, upper: float = math.inf,
                      epsabs: float = 1e-10):
    """Integrate ``g(y) * f^<m>(y)`` over ``y <= upper``.

    ``g`` may be vector valued (returns an array); the integral is then taken
    elementwise.  ``damage=None`` means damages are identically zero, which
    behaves like ``m == 0``.  The point mass at zero contributes ``g(0)`` when
    ``0 <= upper``.
    """
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    if m == 0 or damage is None:
        val = np.asarray(g(0.0), dtype=float)
        return val if 0.0 <= upper else np.zeros_like(val)
    lo, hi = damage_sum_support(m, damage)
    hi = min(hi, upper)
    if hi <= lo:
        return np.zeros_like(np.asarray(g(lo), dtype=float))

    def integrand(y):
        return np.asarray(g(y), dtype=float) * damage_sum_density(m, damage, y)[0]

    val, _err = integrate.quad_vec(integrand, lo, hi, epsabs=epsabs, epsrel=1e-10, norm="max")
    return val


# ---------------------------------------------------------------------------
# Facilitation counting process
# ---------------------------------------------------------------------------


# Below this facilitation factor the count pmf uses a cancellation-free form.
SMALL_ETA = 1e-4


def poisson_pmf(m, mean):
    m = np.asarray(m)
    mean = np.asarray(mean, dtype=float)
    out = np.exp(special.xlogy(m, mean) - mean - special.gammaln(m + 1.0))
    return out if out.ndim else float(out)


def count_pmf(m, Lambda0, eta):
    """P(N(t) = m) for the facilitation process with accumulated baseline
    intensity ``Lambda0`` and facilitation factor ``eta``.

    For ``eta > 0`` this is a negative binomial law,
    ``C(1/eta + m - 1, m) (1 - e^{-eta L})^m e^{-L}``, evaluated in log space.
    ``eta == 0`` returns the Poisson pmf with mean ``Lambda0``.
    Broadcasts over ``m`` and ``Lambda0``.
    """
    m = np.asarray(m)
    Lambda0 = np.asarray(Lambda0, dtype=float)
    if np.any(m < 0):
        raise DomainError("m must be >= 0")
    if np.any(np.isnan(Lambda0)) or np.any(Lambda0 < 0):
        raise DomainError("Lambda0 must be >= 0")
    if not (math.isfinite(eta) and eta >= 0):
        raise DomainError(f"eta must be finite and >= 0, got {eta!r}")
    if eta == 0:
        return poisson_pmf(m, Lambda0)
    p = -np.expm1(-eta * Lambda0)
    if eta < SMALL_ETA:
        # gammaln(r + m) - gammaln(r) cancels for huge r = 1/eta; use
        # log[Gamma(r + m) / Gamma(r) p^m] = sum_{j<m} log(p/eta + p j)
        q = Lambda0 * special.exprel(-eta * Lambda0)  # p / eta without loss for tiny eta
        m_b, q_b, p_b = np.broadcast_arrays(m, q, p)
        acc = np.zeros(m_b.shape)
        with np.errstate(divide="ignore"):
            for j in range(int(m_b.max(initial=0))):
                acc += np.where(m_b > j, np.log(q_b + p_b * j), 0.0)
        out = np.exp(acc - special.gammaln(m_b + 1.0) - Lambda0)
        return out if out.ndim else float(out)
    r = 1.0 / eta
    log_binom = special.gammaln(r + m) - special.gammaln(m + 1.0) - special.gammaln(r)
    out = np.exp(log_binom + special.xlogy(m, p) - Lambda0)
    return out if out.ndim else float(out)


def count_tail_mass(max_m: int, Lambda0, eta: float):
    """P(N > max_m) in closed form: a regularized incomplete gamma for the
    Poisson law, a regularized incomplete beta for the negative binomial."""
    Lambda0 = np.asarray(Lambda0, dtype=float)
    if eta == 0:
        out = special.gammainc(max_m + 1.0, Lambda0)
    elif eta < SMALL_ETA:
        # betainc is inaccurate for b = 1/eta this large; the head sum is not
        head = count_pmf(np.arange(max_m + 1), Lambda0[..., None], eta).sum(axis=-1)
        out = np.clip(1.0 - head, 0.0, 1.0)
    else:
        p = -np.expm1(-eta * Lambda0)
        out = np.where(p > 0, special.betainc(max_m + 1.0, 1.0 / eta, np.where(p > 0, p, 0.5)), 0.0)
    return out if out.ndim else float(out)


def simulate_count_process(params: FacilitationParams, baseline, horizon: float, rng: np.random.Generator,
                           grid_points: int = 4097) -> np.ndarray:
    """Event-driven simulation of the facilitation process on ``(0, horizon]``.

    After ``i`` events the hazard is ``(1 + eta*i) * baseline(t)``.  ``baseline``
    is either None (constant ``params.lambda0``), a nonnegative number, or a
    callable ``t -> intensity`` accepting arrays.  Callables are integrated
    with the trapezoid rule on ``grid_points`` nodes and the event times are
    found by inverting the cumulative hazard.
    """
    if not (math.isfinite(horizon) and horizon > 0):
        raise DomainError(f"horizon must be finite and > 0, got {horizon!r}")
    if baseline is None:
        baseline = params.lambda0
    if callable(baseline):
        grid = np.linspace(0.0, horizon, grid_points)
        lam = np.asarray(baseline(grid), dtype=float)
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise DomainError("baseline intensity must be finite and >= 0")
        cum = integrate.cumulative_trapezoid(lam, grid, initial=0.0)
    else:
        rate = float(baseline)
        if not (math.isfinite(rate) and rate >= 0):
            raise DomainError("baseline intensity must be finite and >= 0")
        grid = np.array([0.0, horizon])
        cum = np.array([0.0, rate * horizon])

    total = cum[-1]
    times = []
    level = 0.0
    i = 0
    while True:
        level += rng.exponential() / (1.0 + params.eta * i)
        if level > total:
            break
        t = float(np.interp(level, cum, grid))
        if times and t <= times[-1]:
            t = math.nextafter(times[-1], math.inf)
        times.append(t)
        i += 1
    return np.asarray(times)


# ---------------------------------------------------------------------------
# Gamma process fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaFit:
    alpha: float
    beta: float
    loglik: float
    grad_norm: float
    iterations: int
    n_used: int
    n_zero: int


def gamma_process_loglik(alpha: float, beta: float, dt, dx) -> float:
    dt = np.asarray(dt, dtype=float)
    dx = np.asarray(dx, dtype=float)
    k = alpha * dt
    return float(np.sum(k * math.log(beta) - special.gammaln(k) + (k - 1) * np.log(dx) - beta * dx))


def gamma_process_score(alpha: float, beta: float, dt, dx) -> np.ndarray:
    """Gradient of :func:`gamma_process_loglik` in ``(alpha, beta)``."""
    dt = np.asarray(dt, dtype=float)
    dx = np.asarray(dx, dtype=float)
    d_alpha = np.sum(dt * (math.log(beta) - special.digamma(alpha * dt) + np.log(dx)))
    d_beta = alpha * dt.sum() / beta - dx.sum()
    return np.array([d_alpha, d_beta])


def fit_gamma_process(data: Sequence[IncrementObservation], max_iter: int = 200, tol: float = 1e-12) -> GammaFit:
    """Maximum likelihood estimate of ``(alpha, beta)`` from observed increments.

    The rate is profiled out (``beta = alpha * sum(dt) / sum(dx)``) and the
    remaining concave score in ``alpha`` is solved by Newton steps guarded by
    a bisection bracket.  Exact zero increments have no density under a
    continuous gamma law and are left out of the likelihood (counted in
    ``n_zero``).
    """
    if len(data) < 2:
        raise DomainError("need at least 2 observations")
    dt_all = np.array([d.dt for d in data], dtype=float)
    dx_all = np.array([d.dx for d in data], dtype=float)
    keep = dx_all > 0
    if not keep.any():
        raise DegenerateDataError("all increments are zero; parameters are unidentifiable")
    dt, dx = dt_all[keep], dx_all[keep]
    if dt.size < 2:
        raise DegenerateDataError("fewer than 2 positive increments")
    ratio = dx / dt
    if np.ptp(ratio) <= 1e-12 * ratio.mean():
        raise DegenerateDataError("increments are exactly proportional to elapsed time "
                                  "(zero sample variance); alpha is unbounded")

    T, S = dt.sum(), dx.sum()
    c = np.sum(dt * np.log(dx))

    def score(a):
        return T * math.log(a * T / S) - np.sum(dt * special.digamma(a * dt)) + c

    def dscore(a):
        return T / a - np.sum(dt * dt * special.polygamma(1, a * dt))

    # moment-matching start
    rate_hat = S / T
    resid = np.sum((dx - rate_hat * dt) ** 2)
    denom = T - np.sum(dt * dt) / T
    v = resid / denom if denom > 0 else resid / T
    a = rate_hat * rate_hat / v if v > 0 else 1.0
    a = min(max(a, 1e-8), 1e8)

    # bracket the root; the score decreases in alpha
    lo, hi = a, a
    for _ in range(200):
        if score(lo) > 0:
            break
        lo /= 4.0
    for _ in range(200):
        if score(hi) < 0:
            break
        hi *= 4.0
    if not (score(lo) > 0 > score(hi)):
        raise ConvergenceError("could not bracket the likelihood maximum",
                               {"lo": lo, "hi": hi, "score_lo": score(lo), "score_hi": score(hi)})

    it = 0
    for it in range(1, max_iter + 1):
        f = score(a)
        if f > 0:
            lo = max(lo, a)
        else:
            hi = min(hi, a)
        step = f / dscore(a)
        a_new = a - step
        if not (lo < a_new < hi):
            a_new = 0.5 * (lo + hi)
        if abs(a_new - a) <= tol * a_new:
            a = a_new
            break
        a = a_new
    else:
        raise ConvergenceError("alpha iteration did not converge",
                               {"alpha": a, "score": score(a), "bracket": (lo, hi), "iterations": max_iter})

    b = a * T / S
    ll = gamma_process_loglik(a, b, dt, dx)
    grad = gamma_process_score(a, b, dt, dx)
    return GammaFit(alpha=float(a), beta=float(b), loglik=ll, grad_norm=float(np.linalg.norm(grad)),
                    iterations=it, n_used=int(dt.size), n_zero=int((~keep).sum()))


def read_increments_csv(path) -> list[IncrementObservation]:
    """Read increment data from a CSV file with header ``dt,dx``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["dt", "dx"]:
            raise DomainError(f"{path}: expected header 'dt,dx', got {reader.fieldnames}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(IncrementObservation(float(row["dt"]), float(row["dx"])))
            except (TypeError, ValueError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
    return out
