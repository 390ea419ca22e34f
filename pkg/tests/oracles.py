"""Independent reference computations used by the tests.

Nothing here calls into the library's numerical code: gamma CDFs come from
adaptive quadrature of the density, reliabilities from direct simulation of
the degradation, shock count, shock magnitude and damage variables.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def gamma_cdf_quad(x: float, shape: float, rate: float) -> float:
    """P(X <= x) for X ~ Gamma(shape, rate) by integrating the density."""
    if x <= 0:
        return 0.0
    logc = shape * math.log(rate) - math.lgamma(shape)

    def pdf(v):
        if v <= 0:
            return 0.0
        return math.exp(logc + (shape - 1.0) * math.log(v) - rate * v)

    if shape < 1:
        # w = v^shape removes the singularity at 0: int_0^{x^a} exp(-rate w^(1/a)) dw / a
        a = shape
        val, _ = integrate.quad(lambda w: math.exp(-rate * w ** (1.0 / a)), 0.0, x ** a,
                                epsabs=1e-14, epsrel=1e-12, limit=500)
        return math.exp(logc) * val / a

    # the density is negligible more than 40 sd below the mean; split the rest
    # at the mode and at +-1, +-4 sd so quad sees the peak
    sd = math.sqrt(shape) / rate
    mode = max((shape - 1.0) / rate, 0.0)
    lo = max(0.0, shape / rate - 40 * sd)
    if x <= lo:
        return 0.0
    pts = sorted(p for p in (mode, mode - sd, mode + sd, mode - 4 * sd, mode + 4 * sd) if lo < p < x)
    val, _ = integrate.quad(pdf, lo, x, points=pts or None, epsabs=1e-13, epsrel=1e-12, limit=500)
    return val


def sample_counts(rng, Lambda0: float, eta: float, size: int) -> np.ndarray:
    """Shock counts at a fixed time via the gamma-Poisson mixture.

    With eta > 0 the count law is negative binomial with r = 1/eta and
    success probability exp(-eta Lambda0), i.e. Poisson with a gamma
    distributed mean of shape r and scale exp(eta Lambda0) - 1.
    """
    if eta == 0:
        return rng.poisson(Lambda0, size=size)
    r = 1.0 / eta
    scale = math.expm1(eta * Lambda0)
    return rng.poisson(rng.gamma(r, scale, size=size))


def simulate_system(rng, components, u, t: float, Lambda0: float, eta: float, size: int,
                    time_unit: float = 1.0):
    """Fraction of direct simulations in which a series system survives to t.

    ``components`` holds tuples (H, D, alpha, beta, w_mean, w_std, y_mean,
    y_std); y_std = y_mean = 0 means no damage.  Returns (estimate, stderr).
    """
    n_shocks = sample_counts(rng, Lambda0, eta, size)
    alive = np.ones(size, dtype=bool)
    for (H, D, alpha, beta, wm, ws, ym, ys), ui in zip(components, u):
        x = rng.gamma(alpha * t / time_unit, 1.0 / beta, size=size) if t > 0 else np.zeros(size)
        # sum of k normal damages is N(k ym, k ys^2); max of k normal magnitudes via uniform order stat
        k = n_shocks.astype(float)
        y = ym * k + ys * np.sqrt(k) * rng.standard_normal(size) if ys > 0 or ym > 0 else 0.0
        hard_ok = rng.random(size) < _normal_cdf((D - wm) / ws) ** k
        alive &= hard_ok & (ui + x + y < H)
    p = alive.mean()
    return float(p), float(math.sqrt(max(p * (1 - p), 1e-300) / size))


def _normal_cdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def table1_tuples():
    """Servo-valve spool and sleeve as oracle tuples."""
    return [(5.0, 40.0, 0.5, 1.2, 10.0, 5.0, 0.5, 0.1),
            (6.0, 45.0, 0.2, 1.6, 14.0, 3.0, 0.55, 0.1)]
