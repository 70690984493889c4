"""Experiment configuration: YAML in, validated objects out.

Errors carry the dotted field path and, where the YAML node is known, its
line number.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError, ValidationError
from .integrator import HistoryFunction, StepControl
from .measure import DelayMeasure
from .nonlinearity import LogGrid, make_nonlinearity, make_perturbation

KINDS = ("fde-growth", "hw-compare", "f-diagnostics", "sweep")
CHECKS = {
    "fde-growth": ("growth-rate", "f-over-t", "delta"),
    "hw-compare": ("hw-ratio", "hw-mu"),
    "f-diagnostics": ("lambda", "rv"),
}

DEFAULTS = {
    "kind": "fde-growth",
    "nonlinearity": {"family": "log-power", "alpha": 1.0},
    "measure": {"atoms": [{"location": 0.0, "weight": 1.0}, {"location": -1.0, "weight": 1.0}],
                "density_pieces": []},
    "history": {"kind": "constant", "value": 1.0},
    "horizon": 1000.0,
    "step": {"h": 0.0625, "mode": "fixed", "tol": 1e-10, "h_min": 1e-6, "corrector_passes": 1},
    "grid": {"n": 25, "lo_fraction": 0.1},
    "lambda_grid": {"u_min": 10.0, "u_max": 1e4, "n": 61},
    "rv_sigma": 2.0,
    "tolerances": {"ratio": 0.1, "f_over_t": 0.02, "delta": 0.15, "decay": 0.1,
                   "hw_ratio": 0.1, "hw_mu": 0.05, "rv": 0.02},
    "extrapolation": "log-fit",
    "lambda_override": None,
    "checks": None,
    "perturbation": {"kind": "scaled-ffprime", "c": 0.5},
    "x0": 1.0,
    "y0": 1.0,
    "hw_horizon_u": 1e4,
    "hw_mu_expected": None,
    "output": "fdegrowth-out",
    "write_x_column": True,
    "sweep": {"base_kind": "fde-growth", "parameters": {}, "max_runs": 64},
}


def _line_map(text):
    """Dotted path -> 1-based line number, from the composed YAML node tree."""
    lines = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        lines.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for key, val in node.value:
                sub = f"{path}.{key.value}" if path else str(key.value)
                lines[sub] = key.start_mark.line + 1
                walk(val, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return lines


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key not in ("nonlinearity", "measure"):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def set_path(d, dotted, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if not isinstance(cur.get(k), dict):
            cur[k] = {}
        cur = cur[k]
    cur[keys[-1]] = value


def parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key=value")
    key, val = text.split("=", 1)
    try:
        return key.strip(), yaml.safe_load(val)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override value for {key!r} does not parse: {exc}", field=key) from exc


def load_raw(path, overrides=()):
    """Read YAML, apply ``key=value`` overrides; returns ``(dict, line_map)``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line=line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level of the config must be a mapping", line=1)
    for item in overrides:
        key, val = parse_override(item) if isinstance(item, str) else item
        set_path(data, key, val)
    return data, _line_map(text)


@dataclass
class ExperimentConfig:
    """Resolved configuration plus the objects built from it."""

    resolved: dict
    kind: str
    f: object
    measure: DelayMeasure | None
    history: HistoryFunction
    horizon: float
    step: StepControl
    lambda_grid: LogGrid
    perturbation: object | None
    output: Path

    @property
    def grid(self):
        return self.resolved["grid"]

    @property
    def tolerances(self):
        return self.resolved["tolerances"]


def _num(value, field, lines, positive=False, allow_none=False):
    if value is None and allow_none:
        return None
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", field, lines.get(field)) from None
    if math.isnan(x) or (positive and not x > 0):
        raise ConfigError(f"expected a positive number, got {value!r}", field, lines.get(field))
    return x


def _measure(spec, lines):
    if not isinstance(spec, dict):
        raise ConfigError("measure must be a mapping", "measure", lines.get("measure"))
    atoms_in = spec.get("atoms", []) or []
    pieces_in = spec.get("density_pieces", []) or []
    atoms = []
    for i, a in enumerate(atoms_in):
        fld = f"measure.atoms[{i}]"
        if not isinstance(a, dict) or "location" not in a or "weight" not in a:
            raise ConfigError("atom needs 'location' and 'weight'", fld, lines.get(fld))
        loc = _num(a["location"], fld + ".location", lines)
        w = _num(a["weight"], fld + ".weight", lines)
        if not w > 0:
            raise ConfigError(f"atom {i} has non-positive weight {w!r}", fld + ".weight",
                              lines.get(fld + ".weight"))
        atoms.append((loc, w))
    pieces = []
    for i, p in enumerate(pieces_in):
        fld = f"measure.density_pieces[{i}]"
        if not isinstance(p, dict) or "a" not in p or "b" not in p:
            raise ConfigError("density piece needs 'a' and 'b'", fld, lines.get(fld))
        pieces.append((_num(p["a"], fld + ".a", lines), _num(p["b"], fld + ".b", lines),
                       p.get("kind", p.get("expression_id", "constant")), dict(p.get("params") or {})))
    tau = spec.get("tau")
    if tau is None:
        extent = [abs(a[0]) for a in atoms] + [abs(p[0]) for p in pieces]
        tau = max(extent, default=0.0) or 1.0
    tau = _num(tau, "measure.tau", lines, positive=True)
    try:
        return DelayMeasure(tau, tuple(atoms), tuple(pieces))
    except ValidationError as exc:
        raise ConfigError(str(exc), "measure", lines.get("measure")) from exc


def build(data: dict, lines=None, output=None) -> ExperimentConfig:
    """Validate a raw config dict (defaults filled in) and build the objects."""
    lines = lines or {}
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown top-level keys {unknown}", unknown[0], lines.get(unknown[0]))
    cfg = _merge(DEFAULTS, data)
    if output is not None:
        cfg["output"] = str(output)
    kind = cfg["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {KINDS}", "kind", lines.get("kind"))
    try:
        f = make_nonlinearity(cfg["nonlinearity"])
    except ValidationError as exc:
        raise ConfigError(str(exc), "nonlinearity", lines.get("nonlinearity")) from exc
    measure = _measure(cfg["measure"], lines) if kind in ("fde-growth", "sweep") else None
    if kind == "sweep" and isinstance(cfg["sweep"], dict) and cfg["sweep"].get("base_kind") == "hw-compare":
        measure = None
    hist = cfg["history"] or {}
    try:
        if hist.get("kind", "constant") == "constant":
            history = HistoryFunction(value=hist.get("value", 1.0))
        elif hist.get("kind") == "expression":
            history = HistoryFunction(expression=hist["expression"])
        else:
            raise ValidationError(f"unknown history kind {hist.get('kind')!r}")
        if measure is not None:
            history.validate(measure.tau)
    except (ValidationError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc), "history", lines.get("history")) from exc
    horizon = _num(cfg["horizon"], "horizon", lines, positive=True)
    st = cfg["step"]
    try:
        step = StepControl(h=_num(st["h"], "step.h", lines, positive=True), mode=st["mode"],
                           tol=float(st["tol"]), h_min=float(st["h_min"]),
                           corrector_passes=int(st["corrector_passes"]))
    except ValidationError as exc:
        raise ConfigError(str(exc), "step", lines.get("step")) from exc
    if measure is not None and step.mode == "fixed" and step.h > measure.tau / 4 * (1 + 1e-12):
        raise ConfigError(f"fixed step h={step.h} exceeds tau/4={measure.tau / 4}", "step.h",
                          lines.get("step.h"))
    lg = cfg["lambda_grid"]
    lambda_grid = LogGrid(_num(lg["u_min"], "lambda_grid.u_min", lines, positive=True),
                          _num(lg["u_max"], "lambda_grid.u_max", lines, positive=True), int(lg["n"]))
    if lambda_grid.decades < 3 - 1e-9:
        raise ConfigError("lambda grid must cover at least 3 decades in log x", "lambda_grid",
                          lines.get("lambda_grid"))
    grid = cfg["grid"]
    if int(grid["n"]) < 6 or not (0 < float(grid["lo_fraction"]) < 1):
        raise ConfigError("grid needs n >= 6 and 0 < lo_fraction < 1", "grid", lines.get("grid"))
    if cfg["extrapolation"] not in ("raw", "aitken", "log-fit"):
        raise ConfigError(f"unknown extrapolation model {cfg['extrapolation']!r}", "extrapolation",
                          lines.get("extrapolation"))
    run_kind = cfg["sweep"].get("base_kind", "fde-growth") if kind == "sweep" else kind
    if cfg["checks"] is None:
        checks = list(CHECKS.get(run_kind, ()))
        if run_kind == "hw-compare" and cfg["hw_mu_expected"] is None:
            checks.remove("hw-mu")
        cfg["checks"] = checks
    if not isinstance(cfg["checks"], list) or not cfg["checks"]:
        raise ConfigError("checks must be a non-empty list", "checks", lines.get("checks"))
    bad = [c for c in cfg["checks"] if c not in CHECKS.get(run_kind, ())]
    if bad:
        raise ConfigError(f"unknown checks {bad} for kind {run_kind!r}; expected a subset of "
                          f"{CHECKS.get(run_kind)}", "checks", lines.get("checks"))
    if "hw-mu" in cfg["checks"] and cfg["hw_mu_expected"] is None:
        raise ConfigError("check 'hw-mu' needs hw_mu_expected", "hw_mu_expected",
                          lines.get("checks"))
    for key in ("x0", "y0"):
        _num(cfg[key], key, lines, positive=True)
    pert = None
    if kind == "hw-compare" or (kind == "sweep" and cfg["sweep"].get("base_kind") == "hw-compare"):
        try:
            pert = make_perturbation(f, cfg["perturbation"])
        except ValidationError as exc:
            raise ConfigError(str(exc), "perturbation", lines.get("perturbation")) from exc
    if kind == "sweep":
        sweep_points(cfg, lines)
    cfg["nonlinearity"] = f.descriptor
    if measure is not None:
        cfg["measure"] = measure.to_dict()
    return ExperimentConfig(cfg, kind, f, measure, history, horizon, step, lambda_grid, pert,
                            Path(cfg["output"]))


def sweep_points(cfg, lines=None):
    """Cross product of ``sweep.parameters``; each entry is ``(dotted_key, values)``."""
    lines = lines or {}
    sw = cfg["sweep"]
    params = sw.get("parameters") or {}
    if not isinstance(params, dict) or not params:
        raise ConfigError("sweep needs a non-empty 'parameters' mapping", "sweep.parameters",
                          lines.get("sweep.parameters", lines.get("sweep")))
    keys = list(params)
    for k in keys:
        if not isinstance(params[k], list) or not params[k]:
            raise ConfigError(f"sweep range for {k!r} is empty", f"sweep.parameters.{k}",
                              lines.get(f"sweep.parameters.{k}"))
    combos = [dict(zip(keys, vals)) for vals in itertools.product(*(params[k] for k in keys))]
    cap = int(sw.get("max_runs", 64))
    if len(combos) > cap:
        raise ConfigError(f"sweep has {len(combos)} runs, above max_runs={cap}", "sweep.max_runs",
                          lines.get("sweep.max_runs"))
    if sw.get("base_kind", "fde-growth") not in ("fde-growth", "hw-compare", "f-diagnostics"):
        raise ConfigError("sweep.base_kind must be a single-run kind", "sweep.base_kind",
                          lines.get("sweep.base_kind"))
    return combos
