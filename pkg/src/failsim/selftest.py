"""Built-in oracle checks run by ``failsim selftest``."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .reliability import estimate_reliability_curve, system_reliability_closed
from .model import SystemSpec
from .stochastic import (FacilitationParams, GammaProcessParams, IncrementObservation, count_pmf, count_tail_mass,
                         fit_gamma_process, poisson_pmf, simulate_count_process)


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


def check_pmf_normalization() -> CheckResult:
    m = np.arange(501)
    worst = 0.0
    for lam in (0.1, 1.0, 10.0):
        for eta in (0.01, 0.2, 1.0):
            head = math.fsum(count_pmf(m, lam, eta))
            worst = max(worst, abs(1.0 - head - count_tail_mass(500, lam, eta)))
    return CheckResult("pmf_normalization", worst, 1e-9, worst <= 1e-9,
                       f"max |1 - sum_(m<=500) - analytic tail| = {worst:.2e}")


def check_poisson_limit() -> CheckResult:
    m = np.arange(21)
    d = float(np.max(np.abs(count_pmf(m, 3.0, 1e-6) - poisson_pmf(m, 3.0))))
    return CheckResult("poisson_limit", d, 1e-4, d < 1e-4, f"sup diff = {d:.2e}")


def check_count_simulator(runs: int = 20000, seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    params = FacilitationParams(1e-4, 0.2, 0.0)
    counts = np.array([simulate_count_process(params, None, 1e4, rng).size for _ in range(runs)])
    m = np.arange(counts.max() + 1)
    emp = np.bincount(counts) / runs
    d = float(np.max(np.abs(emp - count_pmf(m, 1.0, 0.2))))
    tol = 3 * math.sqrt(0.25 / runs)
    return CheckResult("count_simulator", d, tol, d < tol, f"sup |empirical - pmf| = {d:.4f} over {runs} runs")


def check_closed_vs_mc(system: SystemSpec, ages, sim, replications: int = 2000) -> list:
    out = []
    t = np.geomspace(sim.t_grid[0], sim.t_grid[-1], 20)
    cfg = dataclasses.replace(sim, replications=min(sim.replications, replications), t_grid=tuple(t))
    sm = system.shock_model
    for eta in (0.0, sm.eta):
        s = SystemSpec(system.components, FacilitationParams(sm.lambda0, eta, 0.0), "facilitation")
        mc = estimate_reliability_curve(s, ages, cfg)
        closed = system_reliability_closed(t, ages, s, cfg.max_shocks)
        excess = float(np.max(np.abs(mc.R - closed) - np.maximum(3 * mc.stderr, 1e-3)))
        out.append(CheckResult(f"closed_vs_mc_eta={eta:g}", excess, 0.0, excess <= 0,
                               f"max |MC - closed| beyond max(3SE, 1e-3) = {excess:.2e}"))
    return out


def check_mle(seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    truth = GammaProcessParams(0.5, 1.2)
    dx = rng.gamma(truth.alpha, 1.0 / truth.beta, size=500)
    fit = fit_gamma_process([IncrementObservation(1.0, float(x)) for x in dx])
    rel = max(abs(fit.alpha - 0.5) / 0.5, abs(fit.beta - 1.2) / 1.2)
    ok = rel < 0.10 and fit.grad_norm < 1e-6
    return CheckResult("mle_recovery", rel, 0.10, ok, f"alpha={fit.alpha:.4f} beta={fit.beta:.4f} "
                                                      f"grad={fit.grad_norm:.1e}")


def run_checks(cfg) -> list:
    return [check_pmf_normalization(), check_poisson_limit(), check_count_simulator(),
            *check_closed_vs_mc(cfg.system, cfg.ages, cfg.sim), check_mle()]
