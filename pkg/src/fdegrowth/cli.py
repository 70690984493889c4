"""Command-line harness: ``fdegrowth run|sweep|check-f|version``.

Exit codes: 0 every requested verdict passed, 1 malformed config or
violated hypothesis, 2 some verdict failed, 3 some verdict inconclusive
(and none failed), 4 the integration itself failed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .asymptotics import (
    F_over_t_series,
    TheoremVerdict,
    _relative_verdict,
    delta_series,
    hw_experiment,
    time_grid,
    verify_growth_rate,
)
from .config import ExperimentConfig, build, load_raw, set_path, sweep_points
from .errors import (
    ConfigError,
    DomainError,
    FDEGrowthError,
    HypothesisViolation,
    QuadratureError,
    StepFailure,
    ValidationError,
)
from .integrator import solve_fde
from .io import format_float, write_csv
from .measure import total_mass
from .nonlinearity import check_rv_index_fprime, estimate_lambda
from .rate_transform import RateTransform
from .series import extrapolate_limit

log = logging.getLogger("fdegrowth")

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_RUNTIME = 0, 1, 2, 3, 4


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _jsonable(obj.item())
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class RunReport:
    config: dict
    version: str = __version__
    series: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    table: list | None = None
    exit_code: int = EXIT_OK

    def to_dict(self):
        out = {
            "tool": "fdegrowth",
            "version": self.version,
            "config": self.config,
            "series": self.series,
            "verdicts": self.verdicts,
            "timings": self.timings,
            "errors": self.errors,
            "warnings": self.warnings,
            "exit_code": self.exit_code,
        }
        if self.table is not None:
            out["table"] = self.table
        return _jsonable(out)

    def write(self, directory):
        path = Path(directory) / "report.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def exit_code_for(statuses):
    if any(s == "fail" for s in statuses):
        return EXIT_FAIL
    if any(s != "pass" for s in statuses):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _verdict_entry(v: TheoremVerdict):
    d = v.to_dict()
    d["extra"] = {k: val for k, val in d["extra"].items()
                  if k not in ("trajectories", "hw_mu_series")}
    return d


def _simple_verdict(check, status, **fields):
    return {"check": check, "status": status, **fields}


def _save_series(report, out, key, series):
    if series is None or series.degenerate:
        return
    path = write_csv(out / f"series_{key}.csv", series.columns())
    report.series[key] = path.name


def _fde_growth(cfg: ExperimentConfig, report, out):
    r = cfg.resolved
    checks = r["checks"]
    tol = cfg.tolerances
    grid = time_grid(cfg.horizon, int(cfg.grid["n"]), float(cfg.grid["lo_fraction"]))
    t0 = time.perf_counter()
    traj = solve_fde(cfg.f, cfg.measure, cfg.history, cfg.horizon, cfg.step)
    report.timings["solve"] = time.perf_counter() - t0
    report.series["trajectory"] = traj.to_csv(out / "trajectory.csv", r["write_x_column"]).name
    rt = RateTransform(cfg.f)
    M = total_mass(cfg.measure)
    t0 = time.perf_counter()
    if "growth-rate" in checks:
        v = verify_growth_rate(cfg.f, cfg.measure, cfg.history, cfg.horizon, cfg.step,
                               tolerance=tol["ratio"], decay_threshold=tol["decay"],
                               n_grid=int(cfg.grid["n"]), model=r["extrapolation"],
                               lambda_override=r["lambda_override"], lambda_grid=cfg.lambda_grid,
                               trajectory=traj, rt=rt)
        _save_series(report, out, "ratio", v.series)
        report.verdicts.append(_verdict_entry(v))
    if "f-over-t" in checks:
        s = F_over_t_series(traj, rt, grid)
        _save_series(report, out, "f_over_t", s)
        lim = extrapolate_limit(s, r["extrapolation"])
        v = _relative_verdict("f-over-t", M, lim, tol["f_over_t"], "mass", s, [],
                              {"raw_final": float(s.values[-1])})
        report.verdicts.append(_verdict_entry(v))
    if "delta" in checks:
        s = delta_series(traj, cfg.f, cfg.measure, grid)
        if s.degenerate:
            report.verdicts.append(_simple_verdict("delta", "inconclusive", note=s.marker))
        else:
            _save_series(report, out, "delta", s)
            lim = extrapolate_limit(s, "raw")
            v = _relative_verdict("delta", 1.0, lim, tol["delta"], "defect", s, [],
                                  {"log_fit": extrapolate_limit(s, "log-fit").estimate})
            report.verdicts.append(_verdict_entry(v))
    report.timings["diagnostics"] = time.perf_counter() - t0


def _hw_compare(cfg: ExperimentConfig, report, out):
    r = cfg.resolved
    tol = cfg.tolerances
    t0 = time.perf_counter()
    v = hw_experiment(cfg.f, cfg.perturbation, float(r["x0"]), float(r["y0"]), cfg.horizon,
                      cfg.step, tolerance=tol["hw_ratio"], X=float(r["hw_horizon_u"]),
                      n_grid=int(cfg.grid["n"]), model=r["extrapolation"])
    report.timings["solve"] = time.perf_counter() - t0
    trajs = v.extra.get("trajectories", {})
    for name, traj in trajs.items():
        report.series[f"trajectory_{name}"] = traj.to_csv(out / f"trajectory_{name}.csv",
                                                          r["write_x_column"]).name
    _save_series(report, out, "hw_mu", v.extra.get("hw_mu_series"))
    _save_series(report, out, "hw_ratio", v.series)
    if "hw-ratio" in r["checks"]:
        entry = _verdict_entry(v)
        entry["check"] = "hw-ratio"
        report.verdicts.append(entry)
    if "hw-mu" in r["checks"]:
        mu = v.extra["hw_mu"]
        expected = float(r["hw_mu_expected"])
        est = mu["estimate"]
        if mu["status"] in ("divergent", "inconclusive"):
            status, dev = "inconclusive", math.inf
        else:
            dev = abs(est - expected) / abs(expected) if expected else abs(est)
            status = "pass" if dev <= tol["hw_mu"] else "fail"
        report.verdicts.append(_simple_verdict("hw-mu", status, predicted=expected, estimated=est,
                                               deviation=dev, tolerance=tol["hw_mu"],
                                               note=mu["note"]))


def _f_diagnostics(cfg: ExperimentConfig, report, out):
    r = cfg.resolved
    t0 = time.perf_counter()
    if "lambda" in r["checks"]:
        lam = estimate_lambda(cfg.f, cfg.lambda_grid)
        _save_series(report, out, "lambda", lam.series)
        status = "inconclusive" if lam.verdict == "inconclusive" else "pass"
        report.verdicts.append(_simple_verdict("lambda", status, regime=lam.label(), **lam.to_dict()))
    if "rv" in r["checks"]:
        rv = check_rv_index_fprime(cfg.f, float(r["rv_sigma"]), cfg.lambda_grid, cfg.tolerances["rv"])
        _save_series(report, out, "rv", rv.series)
        status = {"consistent with RV0": "pass", "not RV0": "fail"}.get(rv.verdict, "inconclusive")
        report.verdicts.append(_simple_verdict("rv", status, regime=rv.verdict, estimated=rv.limit,
                                               uncertainty=rv.uncertainty, tolerance=rv.tolerance))
    report.timings["diagnostics"] = time.perf_counter() - t0


PIPELINES = {"fde-growth": _fde_growth, "hw-compare": _hw_compare, "f-diagnostics": _f_diagnostics}


def execute(cfg: ExperimentConfig, out=None) -> RunReport:
    """Run one experiment, write its CSVs and ``report.json``; sets ``exit_code``."""
    out = Path(out) if out is not None else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(config=copy.deepcopy(cfg.resolved))
    report.config["output"] = str(out)
    if cfg.f.test_only and cfg.kind in ("fde-growth", "hw-compare"):
        msg = (f"nonlinearity family {cfg.f.family!r} is test-only and violates the growth "
               "hypotheses; verdicts are not meaningful")
        log.warning(msg)
        report.warnings.append(msg)
    t0 = time.perf_counter()
    try:
        PIPELINES[cfg.kind](cfg, report, out)
        report.exit_code = exit_code_for([v["status"] for v in report.verdicts])
    except HypothesisViolation as exc:
        report.errors.append({"type": "hypothesis-violation", "message": str(exc)})
        report.exit_code = EXIT_CONFIG
    except (StepFailure, QuadratureError, DomainError, FloatingPointError) as exc:
        report.errors.append({"type": "runtime", "message": str(exc)})
        report.exit_code = EXIT_RUNTIME
    report.timings["total"] = time.perf_counter() - t0
    report.write(out)
    return report


def _sub_run(job):
    """Worker for one sweep point; never raises."""
    index, params, data, out = job
    row = {"run": index, "parameters": params, "output": Path(out).name}
    try:
        cfg = build(data, output=out)
        rep = execute(cfg)
    except ConfigError as exc:
        return {**row, "status": "config-error", "exit_code": EXIT_CONFIG, "error": str(exc)}
    except (ValidationError, FDEGrowthError, ValueError, ArithmeticError) as exc:
        return {**row, "status": "error", "exit_code": EXIT_RUNTIME, "error": str(exc)}
    first = rep.verdicts[0] if rep.verdicts else {}
    return {**row, "status": first.get("status", "error"), "exit_code": rep.exit_code,
            "check": first.get("check"), "regime": first.get("regime"),
            "predicted": first.get("predicted"), "estimated": first.get("estimated"),
            "verdicts": {v["check"]: v["status"] for v in rep.verdicts},
            "error": "; ".join(e["message"] for e in rep.errors) or None}


SWEEP_PRIORITY = (EXIT_CONFIG, EXIT_RUNTIME, EXIT_FAIL, EXIT_INCONCLUSIVE)


def run_sweep(cfg: ExperimentConfig, jobs=1) -> RunReport:
    """Cross product of ``sweep.parameters``, one sub-run per point in ``run_NNN/``."""
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    base = copy.deepcopy(cfg.resolved)
    combos = sweep_points(base)
    base_kind = base["sweep"].get("base_kind", "fde-growth")
    sweep_block = base.pop("sweep")
    base["kind"] = base_kind
    base.pop("output", None)
    jobs_list = []
    for i, params in enumerate(combos):
        data = copy.deepcopy(base)
        for key, val in params.items():
            set_path(data, key, copy.deepcopy(val))
        jobs_list.append((i, params, data, str(out / f"run_{i:03d}")))
    t0 = time.perf_counter()
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sub_run, jobs_list))
    else:
        rows = [_sub_run(j) for j in jobs_list]
    report = RunReport(config=copy.deepcopy(cfg.resolved), table=rows)
    report.config["output"] = str(out)
    report.config["sweep"] = sweep_block
    report.timings["total"] = time.perf_counter() - t0
    report.verdicts = [{"check": "sweep", "run": r["run"], "status": r["status"]} for r in rows]
    codes = {r["exit_code"] for r in rows}
    report.exit_code = next((c for c in SWEEP_PRIORITY if c in codes), EXIT_OK)
    _write_table(out / "sweep.csv", rows)
    report.series["table"] = "sweep.csv"
    report.write(out)
    return report


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, (dict, list)):
        return json.dumps(_jsonable(value), sort_keys=True)
    return str(value)


def _write_table(path, rows):
    cols = ["run", "parameters", "check", "status", "regime", "predicted", "estimated",
            "exit_code", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in cols])


def _parser():
    p = argparse.ArgumentParser(prog="fdegrowth", description="Growth-rate experiments for "
                                "scalar functional differential equations.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run one experiment"), ("sweep", "run a parameter sweep"),
                       ("check-f", "lambda and regular-variation diagnostics for f")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, type=Path, help="YAML experiment file")
        s.add_argument("--out", type=Path, help="output directory (overrides 'output')")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a dotted config key, e.g. nonlinearity.alpha=2")
        if name == "sweep":
            s.add_argument("--jobs", type=int, default=1, help="parallel sub-runs")
    sub.add_parser("version", help="print the tool version")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "version":
        print(f"fdegrowth {__version__}")
        return EXIT_OK
    try:
        data, lines = load_raw(args.config, args.override)
        if args.command == "check-f":
            data["kind"] = "f-diagnostics"
            data.pop("checks", None)
        elif args.command == "sweep":
            data["kind"] = "sweep"
        elif data.get("kind") == "sweep":
            raise ConfigError("use the 'sweep' subcommand for sweep configs", "kind", lines.get("kind"))
        cfg = build(data, lines, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            report = run_sweep(cfg, max(1, args.jobs))
        else:
            report = execute(cfg)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for e in report.errors:
        print(f"{e['type']}: {e['message']}", file=sys.stderr)
    for v in report.verdicts:
        est = v.get("estimated")
        est_s = f" estimated={est:.6g}" if isinstance(est, float) else ""
        print(f"{v['check']}: {v['status']}{est_s}")
    print(f"report: {Path(report.config['output']) / 'report.json'}")
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
