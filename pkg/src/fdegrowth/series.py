"""Diagnostic time series and limit extrapolation.

Every ``lim`` the library checks numerically goes through
:func:`extrapolate_limit` or :func:`classify_tail`.  The uncertainties they
report are heuristic, not rigorous bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MODELS = ("raw", "aitken", "log-fit")
EFFECTIVE_ZERO = 1e-12


@dataclass
class DiagnosticSeries:
    """Samples ``(t, value)`` on an increasing grid.

    ``basis`` names the correction terms used by the ``log-fit`` model, each
    a column sampled on ``t``; without one the fit uses ``1/log t``.  With
    ``fit_log`` the fit is done on ``log(value)``.  ``marker`` is set instead
    of values when the series is undefined (for example ``"degenerate: C=0"``).
    """

    name: str
    t: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    basis: dict | None = None
    fit_log: bool = False
    marker: str | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.marker is not None:
            return
        if self.t.shape != self.values.shape or self.t.ndim != 1:
            raise ValueError("t and values must be 1-D arrays of equal length")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError(f"series {self.name!r}: t must be strictly increasing")
        if self.basis is not None:
            self.basis = {k: np.asarray(v, dtype=float) for k, v in self.basis.items()}
            for k, col in self.basis.items():
                if col.shape != self.t.shape:
                    raise ValueError(f"basis column {k!r} has wrong length")

    @property
    def degenerate(self):
        return self.marker is not None

    def __len__(self):
        return 0 if self.degenerate else len(self.t)

    def tail(self, n):
        """Copy restricted to the last ``n`` samples."""
        sl = slice(len(self) - n, None)
        basis = None if self.basis is None else {k: v[sl] for k, v in self.basis.items()}
        return DiagnosticSeries(self.name, self.t[sl], self.values[sl], dict(self.metadata),
                                basis, self.fit_log)

    def columns(self):
        cols = {"t": self.t, "value": self.values}
        if "log_scale" in self.metadata:
            cols["log_scale"] = np.asarray(self.metadata["log_scale"], dtype=float)
        return cols


@dataclass
class LimitEstimate:
    estimate: float
    uncertainty: float
    model: str
    samples: int
    status: str = "ok"  # ok | zero | divergent | inconclusive
    note: str = ""
    series: DiagnosticSeries | None = field(default=None, repr=False)

    @property
    def conclusive(self):
        return self.status != "inconclusive"

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "uncertainty": self.uncertainty,
            "model": self.model,
            "samples": self.samples,
            "status": self.status,
            "note": self.note,
        }


def aitken(values):
    """Aitken delta-squared sequence ``A_k`` built from consecutive triples.

    Where the second difference vanishes the newest value is used as is.
    """
    x = np.asarray(values, dtype=float)
    if len(x) < 3:
        raise ValueError("Aitken acceleration needs at least 3 values")
    d1 = x[1:-1] - x[:-2]
    d2 = x[2:] - x[1:-1]
    den = d2 - d1
    out = x[2:].copy()
    ok = den != 0
    out[ok] = x[2:][ok] - d2[ok] ** 2 / den[ok]
    return out


def _inconclusive(model, n, note):
    return LimitEstimate(math.nan, math.inf, model, n, "inconclusive", note)


def _raw(series):
    v = series.values
    last3 = v[-3:]
    return LimitEstimate(float(v[-1]), 0.5 * float(last3.max() - last3.min()), "raw", len(v))


def _aitken(series):
    v = series.values
    n = len(v)
    d = np.diff(v)
    scale = max(np.max(np.abs(v)), 1e-300)
    if np.all(np.abs(d) <= 1e-15 * scale):
        return LimitEstimate(float(v[-1]), 0.0, "aitken", n)
    nz = np.abs(d[:-1]) > 1e-15 * scale
    ratios = d[1:][nz] / d[:-1][nz]
    if ratios.size == 0 or not np.all(np.abs(ratios[-3:]) < 1.0):
        return _inconclusive("aitken", n, "tail differences do not contract")
    acc = aitken(v)
    last3 = acc[-3:]
    return LimitEstimate(float(acc[-1]), 0.5 * float(last3.max() - last3.min()), "aitken", n)


def _design(series):
    if series.basis:
        cols = list(series.basis.values())
    else:
        cols = [1.0 / np.log(series.t)]
    return np.column_stack([np.ones_like(series.t)] + cols)


def _lsq_intercept(A, y):
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        return math.nan, math.inf
    resid = y - A @ coef
    dof = A.shape[0] - A.shape[1]
    if dof <= 0:
        return float(coef[0]), 0.0
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), math.sqrt(max(cov[0, 0], 0.0))


def _log_fit(series):
    n = len(series)
    y = series.values
    if series.fit_log:
        if np.any(y <= 0):
            return _inconclusive("log-fit", n, "log-space fit needs positive values")
        y = np.log(y)
    A = _design(series)
    p = A.shape[1]
    if n < p + 1:
        return _inconclusive("log-fit", n, "too few samples for the fit basis")
    if not np.all(np.isfinite(A)):
        return _inconclusive("log-fit", n, "non-finite fit basis")
    est, stderr = _lsq_intercept(A, y)
    if not math.isfinite(est):
        return _inconclusive("log-fit", n, "rank-deficient fit basis")
    # Refit on the later half; the disagreement is the main uncertainty term.
    half = max(p + 2, n // 2)
    shift = 0.0
    if half < n:
        est2, _ = _lsq_intercept(A[-half:], y[-half:])
        if math.isfinite(est2):
            shift = abs(est - est2)
    unc = stderr + shift
    if series.fit_log:
        value = math.exp(est)
        return LimitEstimate(value, value * math.expm1(unc), "log-fit", n)
    return LimitEstimate(est, unc, "log-fit", n)


def extrapolate_limit(series: DiagnosticSeries, model: str = "log-fit", tail=None) -> LimitEstimate:
    """Estimate ``lim value(t)`` as ``t -> inf`` from the samples.

    ``raw``
        last value; uncertainty is the half-spread of the last 3 values.
    ``aitken``
        Aitken delta-squared acceleration of the tail.  Exact on
        ``L + c r^n``.  A tail whose differences do not contract is
        reported as inconclusive with infinite uncertainty.
    ``log-fit``
        least squares ``value ~ L + sum_k a_k b_k(t)`` over the series'
        correction basis (default ``b(t) = 1/log t``).

    ``tail`` restricts the input to the last ``tail`` samples.
    """
    if model not in MODELS:
        raise ValueError(f"unknown extrapolation model {model!r}; expected one of {MODELS}")
    if series.degenerate:
        return _inconclusive(model, 0, series.marker)
    if tail is not None:
        series = series.tail(tail)
    if len(series) < 6:
        raise ValueError(f"extrapolation needs at least 6 samples, got {len(series)}")
    if not np.all(np.isfinite(series.values)):
        return _inconclusive(model, len(series), "non-finite samples")
    if np.all(series.values == series.values[0]):
        return LimitEstimate(float(series.values[0]), 0.0, model, len(series))
    if model == "raw":
        return _raw(series)
    if model == "aitken":
        return _aitken(series)
    return _log_fit(series)


@dataclass
class TailVerdict:
    verdict: str  # finite | zero | infinite | inconclusive
    value: float
    uncertainty: float
    note: str = ""


def classify_tail(values, small=1e-3, large=1e3, finite_rtol=0.01, flat_rtol=1e-9,
                  trend_rtol=0.1):
    """Decide whether samples on a geometric grid tend to 0, a finite value, or infinity.

    Rules, first match wins:

    1. (numerically) flat tail -> finite;
    2. increasing past ``large`` -> infinite, decreasing below ``small`` -> zero;
    3. monotone with contracting differences -> Aitken-accelerate; finite if
       the accelerated tail varies by less than ``finite_rtol``;
    4. monotone, non-contracting, relative change over the tail above
       ``trend_rtol`` -> infinite (increasing) or zero (decreasing);
    5. otherwise inconclusive.
    """
    r = np.asarray(values, dtype=float)
    if r.size < 4 or not np.all(np.isfinite(r)):
        return TailVerdict("inconclusive", math.nan, math.inf, "too few or non-finite samples")
    last = float(r[-1])
    spread = float(np.max(np.abs(r - last)))

    def finite(val, unc, note=""):
        if abs(val) < small:
            return TailVerdict("zero", val, unc, note or "finite limit below zero threshold")
        return TailVerdict("finite", val, unc, note)

    if spread <= flat_rtol * abs(last) or spread == 0.0:
        return finite(last, spread, "flat tail")
    d = np.diff(r)
    increasing = bool(np.all(d > 0))
    decreasing = bool(np.all(d < 0))
    # Non-strict versions tolerate underflow/overflow plateaus.
    if np.all(d >= 0) and last > large:
        return TailVerdict("infinite", math.inf, 0.0, f"increasing past {large:g}")
    if np.all(d <= 0) and abs(last) < small:
        return TailVerdict("zero", 0.0, abs(last), f"decreasing below {small:g}")
    if increasing or decreasing:
        ratios = d[1:] / d[:-1]
        if np.median(ratios) < 0.98 and np.max(ratios) < 1.0:
            acc = aitken(r)
            tail = acc[len(acc) // 2:]
            est = float(acc[-1])
            var = float(np.max(tail) - np.min(tail))
            if var <= finite_rtol * max(abs(est), small):
                return finite(est, max(var, abs(acc[-1] - acc[-2])), "Aitken-accelerated tail")
            return TailVerdict("inconclusive", est, math.inf,
                               "accelerated tail still varies by more than tolerance")
        rel = abs(last - r[0]) / max(abs(r[0]), abs(last))
        if rel > trend_rtol:
            if increasing:
                return TailVerdict("infinite", math.inf, 0.0, "non-contracting growth")
            return TailVerdict("zero", 0.0, abs(last), "non-contracting decay")
        return TailVerdict("inconclusive", last, math.inf, "slow monotone drift")
    if spread <= finite_rtol * abs(last):
        return finite(float(np.mean(r)), spread, "oscillating within tolerance")
    return TailVerdict("inconclusive", last, math.inf, "erratic tail without trend")


def geometric_grid(lo, hi, n):
    if not (0 < lo < hi):
        raise ValueError(f"geometric grid needs 0 < lo < hi, got {lo}, {hi}")
    if n < 2:
        raise ValueError("geometric grid needs at least 2 points")
    g = np.geomspace(lo, hi, int(n))
    g[0], g[-1] = lo, hi
    return g
