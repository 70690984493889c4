"""Diagnostic series built from trajectories, and the growth-rate verdicts.

Series are sampled on a geometric time grid, by default ``[T/10, T]``.  The
ratio series carry a correction basis in ``1/log x(t)`` and
``log log x(t) / log x(t)`` for the ``log-fit`` model: their error terms decay
in the logarithm of the solution rather than of time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolation
from .integrator import HistoryFunction, StepControl, Trajectory, solve_fde, solve_ode
from .measure import DelayMeasure, delay_moment, total_mass
from .nonlinearity import LogGrid, Nonlinearity, Perturbation, estimate_lambda
from .quadrature import adaptive_gl
from .rate_transform import RateTransform
from .series import (
    EFFECTIVE_ZERO,
    DiagnosticSeries,
    LimitEstimate,
    classify_tail,
    extrapolate_limit,
    geometric_grid,
)

__all__ = [
    "TheoremVerdict",
    "time_grid",
    "ratio_series",
    "F_over_t_series",
    "delta_series",
    "extrapolate_limit",
    "verify_growth_rate",
    "compute_hw_mu",
    "check_hw_hypotheses",
    "hw_experiment",
]


def time_grid(T, n=25, lo_fraction=0.1):
    return geometric_grid(lo_fraction * T, T, n)


def _log_scale_basis(v):
    v = np.asarray(v, dtype=float)
    if np.all(v > 1.0):
        return {"1/log x": 1.0 / v, "loglog x/log x": np.log(v) / v}
    return None


def ratio_series(x: Trajectory, rt: RateTransform, M: float, grid) -> DiagnosticSeries:
    """``x(t) / F^{-1}(M t)``, formed as ``exp(v(t) - u(M t))`` in the log domain."""
    t = np.asarray(grid, dtype=float)
    v = x.log_x(t)
    u = rt.invert_F(M * t)
    return DiagnosticSeries("ratio_x_over_Finv", t, np.exp(v - u),
                            {"log_scale": v, "M": M}, _log_scale_basis(v), fit_log=True)


def F_over_t_series(x: Trajectory, rt: RateTransform, grid) -> DiagnosticSeries:
    """``F(x(t)) / t``.  Correction basis ``log x / t`` and ``1/t``."""
    t = np.asarray(grid, dtype=float)
    v = x.log_x(t)
    F = rt.compute_F(v)
    return DiagnosticSeries("F_over_t", t, F / t, {"log_scale": v},
                            {"log x/t": v / t, "1/t": 1.0 / t})


def delta_series(x: Trajectory, f: Nonlinearity, m: DelayMeasure, grid) -> DiagnosticSeries:
    """``delta(t) / (M C f(x) f'(x))`` with ``delta = M f(x(t)) - x'(t)``.

    Uses ``x'/f(x) = (x'/x) exp(v - log f)`` so nothing is exponentiated at
    full size.  Returns a degenerate marker when ``C = 0``.
    """
    M, C = total_mass(m), delay_moment(m)
    t = np.asarray(grid, dtype=float)
    if C == 0.0:
        return DiagnosticSeries("delta_normalised", [], [], {"M": M, "C": C},
                                marker="degenerate: C=0")
    v = x.log_x(t)
    xprime_over_f = x.dlog_x(t) * np.exp(v - f.logf(v))
    values = (M - xprime_over_f) / (M * C * f.fprime_log(v))
    basis = {"1/log x": 1.0 / v} if np.all(v > 0) else None
    return DiagnosticSeries("delta_normalised", t, values,
                            {"log_scale": v, "M": M, "C": C}, basis)


@dataclass
class TheoremVerdict:
    """Outcome of comparing an extrapolated limit with its prediction.

    ``status`` is ``pass``, ``fail`` or ``inconclusive``; ``passed`` holds
    exactly when ``deviation <= tolerance`` and the estimate is conclusive.
    """

    check: str
    predicted: float
    estimated: float
    deviation: float
    tolerance: float
    regime: str
    status: str
    limit: LimitEstimate | None = None
    series: DiagnosticSeries | None = field(default=None, repr=False)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        out = {
            "check": self.check,
            "predicted": self.predicted,
            "estimated": self.estimated,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "regime": self.regime,
            "status": self.status,
            "notes": list(self.notes),
            "extra": dict(self.extra),
        }
        if self.limit is not None:
            out["limit"] = self.limit.to_dict()
        return out


def _relative_verdict(check, predicted, limit, tolerance, regime, series, notes, extra):
    if not limit.conclusive:
        return TheoremVerdict(check, predicted, limit.estimate, math.inf, tolerance, regime,
                              "inconclusive", limit, series, notes + [limit.note], extra)
    dev = abs(limit.estimate - predicted) / abs(predicted)
    status = "pass" if dev <= tolerance else "fail"
    return TheoremVerdict(check, predicted, limit.estimate, dev, tolerance, regime, status,
                          limit, series, notes, extra)


def _lambda_regime(f, lambda_override, lambda_grid):
    """Returns ``(verdict, value, note)``."""
    if lambda_override is not None:
        lam = float(lambda_override)
        if lam == 0.0:
            return "zero", 0.0, "lambda overridden"
        if math.isinf(lam):
            return "infinite", math.inf, "lambda overridden"
        return "finite", lam, "lambda overridden"
    est = estimate_lambda(f, lambda_grid)
    return est.verdict, est.value, est.note


def verify_growth_rate(f: Nonlinearity, m: DelayMeasure, psi: HistoryFunction | None = None,
                       T: float = 1000.0, sc: StepControl = StepControl(), tolerance: float = 0.1,
                       decay_threshold: float = 0.1, n_grid: int = 25, model: str = "log-fit",
                       lambda_override=None, lambda_grid: LogGrid = LogGrid(),
                       trajectory: Trajectory | None = None,
                       rt: RateTransform | None = None) -> TheoremVerdict:
    """Check ``x(t) / F^{-1}(M t) -> exp(-lambda C)`` for one configuration.

    ``lambda`` comes from :func:`estimate_lambda` unless overridden.  Regimes:

    * finite: prediction ``exp(-lambda C)``, relative deviation of the
      extrapolated limit;
    * zero: prediction 1;
    * infinite: the limit is 0, which no finite run reaches.  The check is
      that the series decreases and ends below ``decay_threshold``;
      ``deviation`` is the final value;
    * bounded ``f``: the limit holds trivially and nothing is simulated.

    Pass an existing ``trajectory`` to skip the solve.
    """
    M, C = total_mass(m), delay_moment(m)
    notes = []
    if f.test_only:
        notes.append(f"family {f.family!r} is test-only and violates the growth hypotheses")
    regime, lam, lam_note = _lambda_regime(f, lambda_override, lambda_grid)
    extra = {"M": M, "C": C, "lambda_verdict": regime, "lambda": lam, "lambda_note": lam_note}
    check = "growth-rate"
    if regime == "bounded":
        notes.append("bounded f: limit holds trivially; not simulated")
        return TheoremVerdict(check, 1.0, math.nan, 0.0, tolerance, "bounded", "pass",
                              notes=notes, extra=extra)
    if regime == "inconclusive":
        return TheoremVerdict(check, math.nan, math.nan, math.inf, tolerance, regime,
                              "inconclusive", notes=notes + [lam_note], extra=extra)
    if trajectory is None:
        trajectory = solve_fde(f, m, psi, T, sc)
    T = trajectory.T
    rt = RateTransform(f) if rt is None else rt
    series = ratio_series(trajectory, rt, M, time_grid(T, n_grid))
    if regime == "finite":
        extra["heuristic_hw_mu"] = lam * C
        limit = extrapolate_limit(series, model)
        return _relative_verdict(check, math.exp(-lam * C), limit, tolerance,
                                 f"finite({lam:.6g})", series, notes, extra)
    if regime == "zero":
        limit = extrapolate_limit(series, model)
        return _relative_verdict(check, 1.0, limit, tolerance, "zero", series, notes, extra)
    # infinite: only decay towards 0 can be observed
    vals = series.values
    decreasing = bool(np.all(np.diff(vals) < 0))
    final = float(vals[-1])
    dev = final if decreasing else math.inf
    if not decreasing:
        notes.append("ratio series is not decreasing on the grid")
    status = "pass" if dev <= decay_threshold else "fail"
    limit = LimitEstimate(final, 0.0, "raw", len(vals), "zero" if status == "pass" else "ok")
    return TheoremVerdict(check, 0.0, final, dev, decay_threshold, "infinite", status,
                          limit, series, notes, extra)


# --- Hartman-Wintner comparison ----------------------------------------------

def check_hw_hypotheses(f: Nonlinearity, eps: Perturbation, X: float = 1e4, n: int = 400):
    """Sampled checks: ``0 <= eps < f``, ``eps/f -> 0``, ``f(x)/x -> 0``.

    Ratios below ``EFFECTIVE_ZERO`` count as zero.  Raises
    :class:`HypothesisViolation` naming the first failed condition.
    """
    u = np.concatenate([np.linspace(-10.0, 0.0, 41)[:-1],
                        np.geomspace(1e-3, X, n)])
    ratio = np.asarray(eps.ratio_log(u), dtype=float)
    if not np.all(np.isfinite(ratio)):
        raise HypothesisViolation("eps/f is not finite on the sampled range")
    bad = np.flatnonzero(ratio >= 1.0)
    if bad.size:
        x_bad = math.exp(u[bad[0]])
        raise HypothesisViolation(f"eps >= f at x = {x_bad:.6g} (eps/f = {ratio[bad[0]]:.6g}); "
                                  "f - eps must stay positive")
    beyond = u > math.log(max(f.x1, 1e-300)) if f.x1 > 0 else np.ones_like(u, dtype=bool)
    neg = np.flatnonzero(beyond & (ratio < 0))
    if neg.size:
        raise HypothesisViolation(f"eps < 0 at x = {math.exp(u[neg[0]]):.6g} beyond the monotone threshold")
    tail = ratio[-n // 4:]
    if tail.max() > EFFECTIVE_ZERO and not tail[-1] < 0.5 * ratio[np.searchsorted(u, 10.0)]:
        raise HypothesisViolation("eps/f does not decay towards 0 on the sampled range")
    if math.exp(float(f.logf(X)) - X) > 1e-2:
        raise HypothesisViolation("f(x)/x does not decay towards 0 on the sampled range")


def compute_hw_mu(f: Nonlinearity, eps: Perturbation, X: float = 1e4, u_min: float = 10.0,
                  n: int = 41) -> LimitEstimate:
    """Limit of ``(f(x)/x) int_0^x eps(u)/f(u)^2 du`` as ``x -> inf``.

    Sampled at ``x = e^u`` for ``u`` on a geometric grid up to ``X``.  The
    integral is split at ``x = 1``: direct quadrature below, ``u``-domain
    quadrature of ``(eps/f)(e^w) e^w / f(e^w)`` above.  A divergent series
    is reported with status ``divergent``.
    """
    u = geometric_grid(u_min, X, n)

    def integrand(w):
        return eps.ratio_log(w) * np.exp(w - f.logf(w))

    with np.errstate(divide="ignore"):
        lower = adaptive_gl(lambda x: eps.ratio_log(np.log(x)) / f.f(x), 0.0, 1.0,
                            rtol=1e-12, atol=1e-300)
    knots = np.concatenate([[0.0], u])
    pieces = [adaptive_gl(integrand, a, b, rtol=1e-12, atol=1e-300) for a, b in zip(knots, knots[1:])]
    I = lower + np.cumsum(pieces)
    vals = np.exp(f.logf(u) - u) * I
    series = DiagnosticSeries("hw_mu", u, vals, {"log_scale": u},
                              {"1/log x": 1.0 / u, "loglog x/log x": np.log(u) / u})
    if np.all(np.abs(vals) <= EFFECTIVE_ZERO):
        return LimitEstimate(0.0, float(np.max(np.abs(vals))), "raw", len(vals), "zero",
                             "perturbation effectively zero", series)
    tail = vals[u >= X / 10.0 * (1 - 1e-12)]
    tv = classify_tail(tail, small=EFFECTIVE_ZERO)
    if tv.verdict == "infinite":
        return LimitEstimate(math.inf, math.inf, "raw", len(vals), "divergent",
                             "mu = inf: divergent integral, no finite comparison constant (out of scope)", series)
    if tv.verdict == "zero":
        return LimitEstimate(0.0, abs(float(vals[-1])), "raw", len(vals), "zero", tv.note, series)
    if tv.verdict == "inconclusive":
        return LimitEstimate(math.nan, math.inf, "log-fit", len(vals), "inconclusive", tv.note, series)
    est = extrapolate_limit(series, "log-fit")
    est.series = series
    return est


def hw_experiment(f: Nonlinearity, eps: Perturbation, x0: float = 1.0, y0: float = 1.0,
                  T: float = 1000.0, sc: StepControl = StepControl(), tolerance: float = 0.1,
                  X: float = 1e4, n_grid: int = 25, model: str = "log-fit") -> TheoremVerdict:
    """Compare ``x' = f(x) - eps(x)`` with ``y' = f(y)``: ``x/y -> exp(-mu)``."""
    check_hw_hypotheses(f, eps, X)
    mu = compute_hw_mu(f, eps, X)
    extra = {"hw_mu": mu.to_dict(), "hw_mu_series": mu.series}
    if mu.status in ("divergent", "inconclusive"):
        return TheoremVerdict("hw-compare", math.nan, math.nan, math.inf, tolerance, "hw",
                              "inconclusive", mu, notes=[mu.note], extra=extra)
    x = solve_ode(f, 1.0, x0, T, sc, perturbation=eps)
    y = solve_ode(f, 1.0, y0, T, sc)
    t = time_grid(T, n_grid)
    vx, vy = x.log_x(t), y.log_x(t)
    series = DiagnosticSeries("ratio_x_over_y", t, np.exp(vx - vy), {"log_scale": vy},
                              _log_scale_basis(vy), fit_log=True)
    limit = extrapolate_limit(series, model)
    predicted = math.exp(-mu.estimate)
    extra["trajectories"] = {"x": x, "y": y}
    return _relative_verdict("hw-compare", predicted, limit, tolerance,
                             f"hw_mu={mu.estimate:.6g}", series, [], extra)
