"""Nonlinearities ``f`` with derivative and log-domain channels.

Every family exposes

* ``f(x)``, ``fprime(x)`` on ordinary arguments,
* ``logf(u) = log f(e^u)`` and ``fprime_log(u) = f'(e^u)``, which stay finite
  for ``u`` far beyond the double range of ``e^u``.

Asymptotic probing is always done in ``u = log x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HypothesisViolation, ValidationError
from .series import DiagnosticSeries, classify_tail, geometric_grid

LOG2 = math.log(2.0)


class Nonlinearity:
    """Base class; subclasses implement the four channels."""

    family = "abstract"
    test_only = False
    x1 = 0.0

    def f(self, x):
        raise NotImplementedError

    def fprime(self, x):
        raise NotImplementedError

    def logf(self, u):
        raise NotImplementedError

    def fprime_log(self, u):
        raise NotImplementedError

    def log_fprime(self, u):
        """``log f'(e^u)``; only meaningful where ``f' > 0``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.fprime_log(u))

    @property
    def params(self):
        return {}

    @property
    def descriptor(self):
        return {"family": self.family, **self.params}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.params == other.params

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params.items()))))


class LogPower(Nonlinearity):
    """``f(x) = (x + 1) / log(2 + x)**alpha``."""

    family = "log-power"

    def __init__(self, alpha):
        alpha = float(alpha)
        if not (math.isfinite(alpha) and alpha > 0):
            raise ValidationError(f"alpha must be positive, got {alpha!r}")
        self.alpha = alpha
        self.x1 = math.exp(alpha) - 2.0

    @property
    def params(self):
        return {"alpha": self.alpha}

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return (x + 1.0) / np.log(2.0 + x) ** self.alpha

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        L = np.log(2.0 + x)
        return L ** -self.alpha * (1.0 - (1.0 + x) * self.alpha / ((2.0 + x) * L))

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        return np.logaddexp(0.0, u) - self.alpha * np.log(np.logaddexp(LOG2, u))

    def fprime_log(self, u):
        u = np.asarray(u, dtype=float)
        L = np.logaddexp(LOG2, u)
        q = np.exp(np.logaddexp(0.0, u) - L)  # (1+x)/(2+x)
        return L ** -self.alpha * (1.0 - self.alpha * q / L)


class Power(Nonlinearity):
    """``f(x) = c (1 + x)**p``; test-only."""

    family = "power"
    test_only = True

    def __init__(self, p, c=1.0):
        p, c = float(p), float(c)
        if not (c > 0 and math.isfinite(p)):
            raise ValidationError(f"power family needs c > 0 and finite p, got c={c}, p={p}")
        self.p, self.c = p, c
        self.x1 = 0.0 if p > 0 else math.inf

    @property
    def params(self):
        return {"p": self.p, "c": self.c}

    def f(self, x):
        return self.c * (1.0 + np.asarray(x, dtype=float)) ** self.p

    def fprime(self, x):
        return self.c * self.p * (1.0 + np.asarray(x, dtype=float)) ** (self.p - 1.0)

    def logf(self, u):
        return math.log(self.c) + self.p * np.logaddexp(0.0, np.asarray(u, dtype=float))

    def fprime_log(self, u):
        return np.exp(self.log_fprime(u)) * np.sign(self.p)

    def log_fprime(self, u):
        lg = np.logaddexp(0.0, np.asarray(u, dtype=float))
        with np.errstate(divide="ignore"):
            return math.log(self.c * abs(self.p)) + (self.p - 1.0) * lg if self.p else -np.inf * lg


class LinearTest(Nonlinearity):
    """``f(x) = c x``; test-only (violates sublinearity)."""

    family = "linear-test"
    test_only = True

    def __init__(self, c=1.0):
        c = float(c)
        if not c > 0:
            raise ValidationError(f"linear-test needs c > 0, got {c}")
        self.c = c

    @property
    def params(self):
        return {"c": self.c}

    def f(self, x):
        return self.c * np.asarray(x, dtype=float)

    def fprime(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def logf(self, u):
        return math.log(self.c) + np.asarray(u, dtype=float)

    def fprime_log(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c)


class ConstantTest(Nonlinearity):
    """``f(x) = c``; test-only, bounded."""

    family = "constant-test"
    test_only = True
    x1 = math.inf

    def __init__(self, c=1.0):
        c = float(c)
        if not c > 0:
            raise ValidationError(f"constant-test needs c > 0, got {c}")
        self.c = c

    @property
    def params(self):
        return {"c": self.c}

    def f(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def fprime(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def logf(self, u):
        return np.full_like(np.asarray(u, dtype=float), math.log(self.c))

    def fprime_log(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))


class CriticalTest(Nonlinearity):
    """``f(x) = c x / log(x + e)``, so that ``f(x) log x / x -> c``."""

    family = "critical-test"

    def __init__(self, c=1.0):
        c = float(c)
        if not c > 0:
            raise ValidationError(f"critical-test needs c > 0, got {c}")
        self.c = c

    @property
    def params(self):
        return {"c": self.c}

    def f(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * x / np.log(x + math.e)

    def fprime(self, x):
        x = np.asarray(x, dtype=float)
        L = np.log(x + math.e)
        return self.c / L * (1.0 - x / ((x + math.e) * L))

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        return math.log(self.c) + u - np.log(np.logaddexp(u, 1.0))

    def fprime_log(self, u):
        u = np.asarray(u, dtype=float)
        L = np.logaddexp(u, 1.0)
        return self.c / L * (1.0 - np.exp(u - L) / L)


_EXPR_NAMESPACE = {
    "np": np, "exp": np.exp, "log": np.log, "log1p": np.log1p, "sqrt": np.sqrt,
    "logaddexp": np.logaddexp, "pi": math.pi, "e": math.e, "abs": np.abs,
}


class Expression(Nonlinearity):
    """User-supplied ``f`` and ``f'`` as numpy expressions in ``x``.

    ``logf`` may be supplied as an expression in ``u``; otherwise the log
    channel is ``log f(exp(u))`` and raises :class:`DomainError` once that
    overflows.
    """

    family = "expression"

    def __init__(self, f, fprime, logf=None, fprime_log=None, x1=0.0):
        self.exprs = {"f": f, "fprime": fprime, "logf": logf, "fprime_log": fprime_log}
        self.x1 = float(x1)
        self._code = {}
        for key, src in self.exprs.items():
            if src is None:
                continue
            try:
                self._code[key] = compile(str(src), f"<{key}>", "eval")
            except SyntaxError as exc:
                raise ValidationError(f"expression for {key!r} does not parse: {exc.msg}") from exc
        probe = np.array([0.5, 1.0, 2.0])
        for key in ("f", "fprime"):
            if key not in self._code:
                raise ValidationError(f"expression family needs {key!r}")
            try:
                self._eval(key, x=probe)
            except Exception as exc:
                raise ValidationError(f"expression for {key!r} failed to evaluate: {exc}") from exc

    @property
    def params(self):
        out = {k: v for k, v in self.exprs.items() if v is not None}
        out["x1"] = self.x1
        return out

    def __getstate__(self):
        return {"exprs": self.exprs, "x1": self.x1}

    def __setstate__(self, state):
        self.__init__(**state["exprs"], x1=state["x1"])

    def _eval(self, key, **var):
        out = eval(self._code[key], {"__builtins__": {}}, {**_EXPR_NAMESPACE, **var})
        arr = next(iter(var.values()))
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(arr)).copy()

    def f(self, x):
        return self._eval("f", x=np.asarray(x, dtype=float))

    def fprime(self, x):
        return self._eval("fprime", x=np.asarray(x, dtype=float))

    def logf(self, u):
        u = np.asarray(u, dtype=float)
        if "logf" in self._code:
            return self._eval("logf", u=u)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = np.log(self.f(np.exp(u)))
        if not np.all(np.isfinite(out)):
            raise DomainError("log channel overflowed; supply a 'logf' expression in u")
        return out

    def fprime_log(self, u):
        u = np.asarray(u, dtype=float)
        if "fprime_log" in self._code:
            return self._eval("fprime_log", u=u)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.fprime(np.exp(u))
        if not np.all(np.isfinite(out)):
            raise DomainError("f' overflowed at large argument; supply 'fprime_log' in u")
        return out


FAMILIES = {
    "log-power": LogPower,
    "power": Power,
    "linear-test": LinearTest,
    "constant-test": ConstantTest,
    "critical-test": CriticalTest,
    "expression": Expression,
}
# schema alias for the log-power family
FAMILIES["paper-example"] = LogPower


def make_paper_example(alpha: float) -> LogPower:
    return LogPower(alpha)


def make_nonlinearity(spec: dict) -> Nonlinearity:
    """Build a family member from ``{"family": name, **params}``."""
    spec = dict(spec)
    name = spec.pop("family", None)
    if name not in FAMILIES:
        raise ValidationError(f"unknown nonlinearity family {name!r}; expected one of {sorted(FAMILIES)}")
    try:
        return FAMILIES[name](**spec)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for family {name!r}: {exc}") from exc


# --- perturbations for the Hartman-Wintner comparison -------------------------

class Perturbation:
    """``eps`` expressed through the ratio ``eps/f`` in the log domain."""

    kind = "abstract"

    def __init__(self, f: Nonlinearity):
        self.source = f

    def ratio_log(self, u):
        """``eps(e^u) / f(e^u)``."""
        raise NotImplementedError

    def eps(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return self.source.f(x) * self.ratio_log(np.log(x))

    @property
    def descriptor(self):
        return {"kind": self.kind}


class ScaledFFPrime(Perturbation):
    """``eps = c f f'``."""

    kind = "scaled-ffprime"

    def __init__(self, f, c):
        super().__init__(f)
        self.c = float(c)

    def ratio_log(self, u):
        return self.c * self.source.fprime_log(u)

    @property
    def descriptor(self):
        return {"kind": self.kind, "c": self.c}


class ScaledF(Perturbation):
    """``eps = c f``; with tiny ``c`` a stand-in for "no perturbation"."""

    kind = "scaled-f"

    def __init__(self, f, c):
        super().__init__(f)
        self.c = float(c)

    def ratio_log(self, u):
        return np.full_like(np.asarray(u, dtype=float), self.c)

    @property
    def descriptor(self):
        return {"kind": self.kind, "c": self.c}


PERTURBATIONS = {"scaled-ffprime": ScaledFFPrime, "scaled-f": ScaledF}


def make_perturbation(f: Nonlinearity, spec: dict) -> Perturbation:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in PERTURBATIONS:
        raise ValidationError(f"unknown perturbation kind {kind!r}; expected one of {sorted(PERTURBATIONS)}")
    try:
        return PERTURBATIONS[kind](f, **spec)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for perturbation {kind!r}: {exc}") from exc


# --- diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class LogGrid:
    """Geometric grid in ``u = log x``."""

    u_min: float = 10.0
    u_max: float = 1e4
    n: int = 61

    def points(self):
        return geometric_grid(self.u_min, self.u_max, self.n)

    @property
    def decades(self):
        return math.log10(self.u_max / self.u_min)

    def last_decade(self):
        u = self.points()
        return u[u >= self.u_max / 10.0 * (1 - 1e-12)]


@dataclass
class LambdaEstimate:
    verdict: str  # zero | finite | infinite | bounded | inconclusive
    value: float
    uncertainty: float
    series: DiagnosticSeries
    note: str = ""

    def label(self):
        if self.verdict == "finite":
            return f"finite({self.value:.6g})"
        return self.verdict

    def to_dict(self):
        return {"verdict": self.verdict, "value": self.value,
                "uncertainty": self.uncertainty, "note": self.note}


def _is_bounded(f, u):
    """Sampled check that ``log f`` converges (``f`` has a finite limit)."""
    lf = f.logf(u)
    d = np.diff(lf)
    if np.all(np.abs(d) <= 1e-14 * np.maximum(1.0, np.abs(lf[1:]))):
        return True
    tv = classify_tail(lf - lf[0] + 1.0, small=0.0, large=math.inf, finite_rtol=1e-6)
    return tv.verdict == "finite"


def estimate_lambda(f: Nonlinearity, grid: LogGrid = LogGrid()) -> LambdaEstimate:
    """Classify ``lim f(x) log(x) / x`` as zero, finite, or infinite.

    ``r(u) = u exp(logf(u) - u)`` is sampled on ``grid``; the verdict comes
    from the last decade of the samples (see :func:`classify_tail`).  A
    bounded ``f`` is reported separately as the trivial regime.
    """
    if grid.decades < 3 - 1e-9:
        raise ValueError(f"grid must cover at least 3 decades in u, got {grid.decades:.2f}")
    u = grid.points()
    # Saturate instead of overflowing; the classifier only needs r > large.
    r = u * np.exp(np.minimum(f.logf(u) - u, 700.0))
    series = DiagnosticSeries("lambda_ratio", u, r, {"family": f.descriptor})
    tail = grid.last_decade()
    if _is_bounded(f, tail):
        return LambdaEstimate("bounded", 0.0, 0.0, series, "bounded-f trivial regime")
    tv = classify_tail(r[-len(tail):])
    return LambdaEstimate(tv.verdict, tv.value, tv.uncertainty, series, tv.note)


@dataclass
class RVCheck:
    series: DiagnosticSeries
    limit: float
    uncertainty: float
    verdict: str  # consistent with RV0 | not RV0 | inconclusive
    tolerance: float


def check_rv_index_fprime(f: Nonlinearity, sigma: float = 2.0, grid: LogGrid = LogGrid(),
                          tolerance: float = 0.02) -> RVCheck:
    """Series ``f'(sigma x) / f'(x)`` and whether its limit is 1 (index 0)."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    u = grid.points()
    with np.errstate(invalid="ignore"):
        ratio = np.exp(f.log_fprime(u + math.log(sigma)) - f.log_fprime(u))
    series = DiagnosticSeries(f"fprime_ratio_sigma{sigma:g}", u, ratio, {"sigma": sigma})
    tv = classify_tail(ratio[-len(grid.last_decade()):], small=0.0, large=math.inf)
    if tv.verdict != "finite":
        return RVCheck(series, tv.value, tv.uncertainty, "inconclusive", tolerance)
    ok = abs(tv.value - 1.0) <= tolerance
    return RVCheck(series, tv.value, tv.uncertainty,
                   "consistent with RV0" if ok else "not RV0", tolerance)


def check_channels(f: Nonlinearity, u_max=500.0, n=201, atol=1e-10):
    """Maximum ``|logf(u) - log f(e^u)|`` over representable ``u`` in ``[0, u_max]``."""
    u = np.linspace(0.0, min(u_max, 700.0), n)
    with np.errstate(over="ignore"):
        direct = np.log(f.f(np.exp(u)))
    err = float(np.max(np.abs(f.logf(u) - direct)))
    if err > atol:
        raise HypothesisViolation(f"log channel disagrees with f by {err:.3g}")
    return err
