"""CSV and manifest files.

Floats are written with ``repr`` so a write/read cycle is lossless and the
same inputs always give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .maintenance import MODEL_MODES, MaintenanceResult
from .model import InitialAges
from .reliability import ReliabilityCurve

CURVE_HEADER = ["t", "R", "stderr", "method", "seed", "N"]
MODE_MODELS = {v: k for k, v in MODEL_MODES.items()}


def _f(x) -> str:
    return repr(float(x))


def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def curve_rows(curve: ReliabilityCurve, extra=()):
    seed = "" if curve.seed is None else str(curve.seed)
    for t, r, se in zip(curve.t, curve.R, curve.stderr):
        yield [*extra, _f(t), _f(r), _f(se), curve.method, seed, str(curve.N)]


def write_curve_csv(path, curve: ReliabilityCurve) -> None:
    _write_rows(path, CURVE_HEADER, curve_rows(curve))


def write_labelled_curves_csv(path, label: str, curves: dict) -> None:
    """Several curves in one file, distinguished by a leading ``label`` column."""
    rows = [row for key, c in curves.items() for row in curve_rows(c, extra=(str(key),))]
    _write_rows(path, [label, *CURVE_HEADER], rows)


def read_curve_csv(path) -> ReliabilityCurve:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no rows")
    seed = rows[0]["seed"]
    return ReliabilityCurve(
        t=np.array([float(r["t"]) for r in rows]),
        R=np.array([float(r["R"]) for r in rows]),
        stderr=np.array([float(r["stderr"]) for r in rows]),
        method=rows[0]["method"],
        seed=int(seed) if seed else None,
        N=int(rows[0]["N"]),
    )


def sweep_header(n: int) -> list:
    return ["scenario", *[f"u_{i + 1}" for i in range(n)], "model", "tau_star", "cr_star", "R_at_tau", "E_rho"]


def write_sweep_csv(path, entries, n: int) -> None:
    rows = []
    for e in entries:
        if e.result is None:
            continue
        r = e.result
        rows.append([str(e.scenario), *[_f(u) for u in e.ages.u], str(e.model),
                     _f(r.tau_star), _f(r.cr_star), _f(r.R_at_tau), _f(r.E_rho_at_tau)])
    _write_rows(path, sweep_header(n), rows)


def read_sweep_csv(path) -> list:
    """Rows of a sweep CSV as dicts with typed values."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        ucols = [c for c in reader.fieldnames if c.startswith("u_")]
        out = []
        for r in reader:
            out.append({"scenario": int(r["scenario"]), "u": tuple(float(r[c]) for c in ucols),
                        "model": int(r["model"]), "tau_star": float(r["tau_star"]),
                        "cr_star": float(r["cr_star"]), "R_at_tau": float(r["R_at_tau"]),
                        "E_rho": float(r["E_rho"])})
    return out


def records_header(n: int) -> list:
    return ["scenario", *[f"u_{i + 1}" for i in range(n)], "model", "tau", "R", "E_rho", "CR"]


def result_rows(result: MaintenanceResult, scenario: int = 1):
    model = MODE_MODELS[result.mode]
    us = [_f(u) for u in result.ages.u]
    for tau, r, e, cr in zip(result.taus, result.R, result.E_rho, result.CR):
        yield [str(scenario), *us, str(model), _f(tau), _f(r), _f(e), _f(cr)]


def write_records_csv(path, results, n: int) -> None:
    """Per-tau diagnostics for one or more ``(scenario, MaintenanceResult)`` pairs."""
    rows = [row for scen, res in results for row in result_rows(res, scen)]
    _write_rows(path, records_header(n), rows)


def read_records_csv(path) -> list:
    """Rebuild ``(scenario, MaintenanceResult)`` pairs from a records CSV."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        ucols = [c for c in reader.fieldnames if c.startswith("u_")]
        groups = {}
        for r in reader:
            key = (int(r["scenario"]), int(r["model"]))
            groups.setdefault(key, {"u": tuple(float(r[c]) for c in ucols), "rows": []})["rows"].append(
                [float(r["tau"]), float(r["R"]), float(r["E_rho"]), float(r["CR"])])
    out = []
    for (scen, model), g in groups.items():
        a = np.array(g["rows"])
        cr = a[:, 3]
        k = int(np.argmin(cr))
        res = MaintenanceResult(ages=InitialAges(g["u"]), mode=MODEL_MODES[model], taus=a[:, 0], R=a[:, 1],
                                E_rho=a[:, 2], CR=cr, tau_star=float(a[k, 0]), cr_star=float(cr[k]), index=k)
        out.append((scen, res))
    return out


def manifest_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".manifest")


def write_manifest(csv_path, *, digest: str, seed, replications, command: str, args: dict) -> Path:
    """Write the ``key=value`` manifest accompanying ``csv_path``."""
    lines = [
        f"output={Path(csv_path).name}",
        f"config_sha256={digest}",
        f"seed={seed}",
        f"replications={replications}",
        f"tool=failsim {__version__}",
        f"python={platform.python_version()}",
        f"numpy={np.__version__}",
        f"timestamp={datetime.now(timezone.utc).isoformat(timespec='seconds')}",
        f"command={command}",
    ]
    lines += [f"arg.{k}={v}" for k, v in sorted(args.items())]
    path = manifest_path(csv_path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out
