"""Command line interface.

Every subcommand writes one or more CSV files into ``--out``, each next to a
``.manifest`` file recording the config digest, seed, replication count,
tool version, timestamp and arguments.  Exit status is 0 on success, 1 for
invalid input and 2 for numerical failures; files written by a failed run
are removed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .config import ConfigError, default_config_path, default_scenarios_path, load_config
from .errors import ConvergenceError, DegenerateDataError, DomainError, NoOptimumError, UnsupportedModeError, \
    ValidationError
from .maintenance import MODEL_MODES, optimize_inspection, scenario_sweep
from .model import InitialAges, SystemSpec
from .reliability import default_threads, estimate_reliability_curve
from .stochastic import FacilitationParams, fit_gamma_process, read_increments_csv

log = logging.getLogger("failsim")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class _Run:
    """Tracks the files written by one invocation so a failure can undo them."""

    def __init__(self, args, cfg=None):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out)
        self.written = []

    def path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def emit(self, name, writer, *writer_args):
        p = self.path(name)
        self.written.append(p)
        writer(p, *writer_args)
        self.written.append(fio.manifest_path(p))
        fio.write_manifest(p, digest=self.cfg.digest if self.cfg else "-",
                           seed=self.cfg.sim.seed if self.cfg else "-",
                           replications=self.cfg.sim.replications if self.cfg else "-",
                           command=self.args.command, args=_arg_record(self.args))
        log.info("wrote %s", p)

    def cleanup(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _arg_record(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def _models(args):
    return (1, 2) if args.model == "both" else (int(args.model),)


def _load(args):
    cfg = load_config(args.config or default_config_path())
    sim = cfg.sim
    changes = {"threads": args.threads, "renormalize_pmf": args.renormalize_pmf}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigError([("--replications", "must be >= 1")])
        changes["replications"] = args.replications
    return dataclasses.replace(cfg, sim=dataclasses.replace(sim, **changes))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_reliability(args):
    cfg = _load(args)
    run = _Run(args, cfg)
    curves = {m: estimate_reliability_curve(cfg.system.with_mode(MODEL_MODES[m]), cfg.ages, cfg.sim)
              for m in _models(args)}
    return run, [("reliability.csv", fio.write_labelled_curves_csv, "model", curves)]


def cmd_sensitivity(args):
    cfg = _load(args)
    run = _Run(args, cfg)
    base = cfg.system.with_mode("facilitation")
    curves = {}
    for v in args.values:
        sm = base.shock_model
        params = FacilitationParams(sm.lambda0, v if args.param == "eta" else sm.eta,
                                    v if args.param == "gamma" else sm.gamma)
        curves[repr(float(v))] = estimate_reliability_curve(SystemSpec(base.components, params, base.mode),
                                                            cfg.ages, cfg.sim)
    return run, [(f"sensitivity_{args.param}.csv", fio.write_labelled_curves_csv, args.param, curves)]


def dependence_cases(system: SystemSpec) -> dict:
    """The four dependence settings: (1) none, (2) shock damage only,
    (3) degradation-driven arrivals only, (4) both with facilitation."""
    sm = system.shock_model
    no_damage = tuple(dataclasses.replace(c, shock_damage=None) for c in system.components)
    lam = sm.lambda0
    return {
        1: SystemSpec(no_damage, FacilitationParams(lam, 0.0, 0.0), "facilitation"),
        2: SystemSpec(system.components, FacilitationParams(lam, 0.0, 0.0), "facilitation"),
        3: SystemSpec(no_damage, FacilitationParams(lam, 0.0, sm.gamma), "facilitation"),
        4: SystemSpec(system.components, FacilitationParams(lam, sm.eta, sm.gamma), "facilitation"),
    }


def cmd_cases(args):
    cfg = _load(args)
    run = _Run(args, cfg)
    curves = {k: estimate_reliability_curve(s, cfg.ages, cfg.sim) for k, s in dependence_cases(cfg.system).items()}
    return run, [("cases.csv", fio.write_labelled_curves_csv, "case", curves)]


def cmd_optimize(args):
    cfg = _load(args)
    run = _Run(args, cfg)
    entries = scenario_sweep(cfg.system, [cfg.ages], cfg.costs, cfg.tau_grid, cfg.sim, _models(args), args.threads)
    _raise_first_error(entries)
    n = cfg.system.n
    records = [(e.scenario, e.result) for e in entries]
    return run, [("optimize.csv", fio.write_sweep_csv, entries, n),
                 ("optimize_records.csv", fio.write_records_csv, records, n)]


def read_scenarios(path, n: int):
    """Scenario file: CSV with columns ``u_1..u_n`` and optionally ``scenario``."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = [f"u_{i + 1}" for i in range(n)]
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in cols):
            raise ConfigError([(str(path), f"scenario file needs columns {cols}, got {reader.fieldnames}")])
        labels, ages = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                ages.append(InitialAges(tuple(float(row[c]) for c in cols)))
                labels.append(int(row["scenario"]) if row.get("scenario") else len(labels) + 1)
            except ValueError as exc:
                raise ConfigError([(f"{path}:{lineno}", str(exc))]) from None
    if not ages:
        raise ConfigError([(str(path), "no scenarios")])
    for a in ages:
        if any(not (math.isfinite(v) and v >= 0) for v in a.u):
            raise ConfigError([(str(path), f"initial ages must be finite and >= 0, got {a.u}")])
    return labels, ages


def _raise_first_error(entries):
    failed = [e for e in entries if e.error]
    if failed and len(failed) == len(entries):
        raise NoOptimumError(failed[0].error)


def cmd_sweep(args):
    cfg = _load(args)
    run = _Run(args, cfg)
    labels, scenarios = read_scenarios(args.scenarios or default_scenarios_path(), cfg.system.n)
    entries = scenario_sweep(cfg.system, scenarios, cfg.costs, cfg.tau_grid, cfg.sim, _models(args), args.threads)
    _raise_first_error(entries)
    for e in entries:
        e.scenario = labels[e.scenario - 1]
        if e.error:
            print(f"scenario {e.scenario} model {e.model}: {e.error}", file=sys.stderr)
    n = cfg.system.n
    outputs = [("sweep.csv", fio.write_sweep_csv, entries, n)]
    if args.records:
        recs = [(e.scenario, e.result) for e in entries if e.result is not None]
        outputs.append(("sweep_records.csv", fio.write_records_csv, recs, n))
    return run, outputs


def _write_fit(path, fit):
    fio._write_rows(path, ["alpha", "beta", "loglik", "grad_norm", "n_used", "n_zero"],
                    [[fio._f(fit.alpha), fio._f(fit.beta), fio._f(fit.loglik), fio._f(fit.grad_norm),
                      str(fit.n_used), str(fit.n_zero)]])


def cmd_fit(args):
    run = _Run(args)
    try:
        data = read_increments_csv(args.data)
    except OSError as exc:
        raise ConfigError([(str(args.data), f"cannot read: {exc.strerror or exc}")]) from None
    fit = fit_gamma_process(data)
    print(f"alpha={fit.alpha!r} beta={fit.beta!r} loglik={fit.loglik!r} grad_norm={fit.grad_norm:.3g}")
    return run, [("fit.csv", _write_fit, fit)]


def cmd_selftest(args):
    from .selftest import run_checks

    cfg = _load(args)
    run = _Run(args, cfg)
    results = run_checks(cfg)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")

    def write(path, rows):
        fio._write_rows(path, ["check", "value", "tolerance", "passed"],
                        [[r.name, fio._f(r.value), fio._f(r.tolerance), str(int(r.passed))] for r in rows])

    run.selftest_failed = not all(r.passed for r in results)
    return run, [("selftest.csv", write, results)]


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (default: shipped servo_valve.cfg)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--replications", type=int, help="override the replication count")
    common.add_argument("--out", default="failsim-out", help="output directory")
    common.add_argument("--model", choices=["1", "2", "both"], default="both",
                        help="1 = Poisson shocks, 2 = mutually dependent (facilitation) shocks")
    common.add_argument("--renormalize-pmf", action="store_true", help="rescale per-count probabilities to sum to 1")
    common.add_argument("--threads", type=int, default=default_threads(),
                        help="worker threads (default: $FAILSIM_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="failsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"failsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("reliability", parents=[common], help="system reliability curves").set_defaults(func=cmd_reliability)
    s = sub.add_parser("sensitivity", parents=[common], help="reliability vs gamma or eta")
    s.add_argument("--param", choices=["gamma", "eta"], required=True)
    s.add_argument("--values", type=float, nargs="+", required=True)
    s.set_defaults(func=cmd_sensitivity)
    sub.add_parser("cases", parents=[common], help="four dependence cases").set_defaults(func=cmd_cases)
    sub.add_parser("optimize", parents=[common], help="optimal inspection interval for the config ages") \
        .set_defaults(func=cmd_optimize)
    s = sub.add_parser("sweep", parents=[common], help="optimal intervals over a scenario file")
    s.add_argument("--scenarios", help="CSV with columns scenario,u_1..u_n (default: shipped servo-valve age scenarios)")
    s.add_argument("--records", action="store_true", help="also write per-tau cost-rate records")
    s.set_defaults(func=cmd_sweep)
    s = sub.add_parser("fit", parents=[common], help="fit gamma process parameters to dt,dx data")
    s.add_argument("--data", required=True)
    s.set_defaults(func=cmd_fit)
    sub.add_parser("selftest", parents=[common], help="run built-in oracle checks").set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    run = None
    try:
        run, outputs = args.func(args)
        for name, writer, *wargs in outputs:
            run.emit(name, writer, *wargs)
        _check_outputs(run)
        return EXIT_NUMERIC if getattr(run, "selftest_failed", False) else EXIT_OK
    except (ValidationError, DomainError) as exc:
        _report(exc)
        code = EXIT_INVALID
    except (ConvergenceError, NoOptimumError, DegenerateDataError, UnsupportedModeError,
            FloatingPointError, ArithmeticError) as exc:
        _report(exc)
        code = EXIT_NUMERIC
    if run is not None:
        run.cleanup()
    return code


def _report(exc):
    if isinstance(exc, ValidationError) and exc.violations:
        for path, msg in exc.violations:
            print(f"error: {path}: {msg}", file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def _check_outputs(run):
    """Every number written must be finite."""
    for p in run.written:
        if p.suffix != ".csv":
            continue
        with p.open(newline="") as fh:
            for row in csv.reader(fh):
                for cell in row:
                    try:
                        v = float(cell)
                    except ValueError:
                        continue
                    if not math.isfinite(v):
                        raise FloatingPointError(f"{p.name}: non-finite value {cell!r}")


if __name__ == "__main__":
    sys.exit(main())
