"""Method-of-steps integration of the FDE and of the comparison ODE.

The state is ``v = log x``.  Both solvers use classical RK4 with cubic Hermite
dense output built from ``v`` and ``v' = x'/x`` at the mesh points, so the
interpolant has the stepper's order.  Delayed values come from that
interpolant, or from the history for ``t <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StepFailure, ValidationError
from .io import write_csv
from .measure import DelayMeasure
from .nonlinearity import Nonlinearity, Perturbation, _EXPR_NAMESPACE

LOG_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class StepControl:
    """Step size and mode.

    ``corrector_passes`` only matters when the delay measure has mass in
    ``(-h, 0)``: the step is then redone that many times with the delayed
    values taken from the step's own provisional interpolant.
    """

    h: float = 0.0625
    mode: str = "fixed"
    tol: float = 1e-10
    h_min: float = 1e-6
    corrector_passes: int = 1

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValidationError(f"step size must be positive, got {self.h!r}")
        if self.mode not in ("fixed", "adaptive"):
            raise ValidationError(f"step mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if self.corrector_passes < 0:
            raise ValidationError("corrector_passes must be >= 0")

    def halved(self):
        return StepControl(self.h / 2, self.mode, self.tol, self.h_min, self.corrector_passes)


class HistoryFunction:
    """Positive initial function ``psi`` on ``[-tau, 0]``.

    Either a constant or a numpy expression in ``s``.
    """

    def __init__(self, value=1.0, expression=None):
        self.value = float(value)
        self.expression = expression
        self._code = None
        if expression is not None:
            try:
                self._code = compile(str(expression), "<history>", "eval")
            except SyntaxError as exc:
                raise ValidationError(f"history expression does not parse: {exc.msg}") from exc
        elif not (self.value > 0 and math.isfinite(self.value)):
            raise ValidationError(f"history value must be positive, got {value!r}")

    @classmethod
    def constant(cls, value=1.0):
        return cls(value=value)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self._code is None:
            return np.full_like(s, self.value)
        out = eval(self._code, {"__builtins__": {}}, {**_EXPR_NAMESPACE, "s": s})
        return np.broadcast_to(np.asarray(out, dtype=float), s.shape).copy()

    def log_value(self, s):
        return np.log(self(s))

    def validate(self, tau, n=257):
        s = np.linspace(-tau, 0.0, n)
        vals = self(s)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValidationError("history function must be positive and finite on [-tau, 0]")

    @property
    def descriptor(self):
        if self._code is None:
            return {"kind": "constant", "value": self.value}
        return {"kind": "expression", "expression": self.expression}

    def __getstate__(self):
        return {"value": self.value, "expression": self.expression}

    def __setstate__(self, state):
        self.__init__(**state)


def _hermite(theta, h, y0, y1, m0, m1):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * m0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1)


def _hermite_deriv(theta, h, y0, y1, m0, m1):
    t2 = theta * theta
    return ((6 * t2 - 6 * theta) * (y0 - y1) / h + (3 * t2 - 4 * theta + 1) * m0
            + (3 * t2 - 2 * theta) * m1)


class _Dense:
    """Growing mesh of ``(t, v, v')`` with Hermite evaluation.

    ``provisional`` is an optional polynomial valid on the step currently
    being computed; it is the only way to query past the last node.
    """

    def __init__(self, history, t0, v0, capacity=1024):
        self.history = history
        self.t = np.empty(capacity)
        self.v = np.empty(capacity)
        self.d = np.empty(capacity)
        self.n = 0
        self.provisional = None
        self.append(t0, v0, math.nan)

    def append(self, t, v, d):
        if self.n == len(self.t):
            for name in ("t", "v", "d"):
                arr = getattr(self, name)
                setattr(self, name, np.concatenate([arr, np.empty_like(arr)]))
        self.t[self.n], self.v[self.n], self.d[self.n] = t, v, d
        self.n += 1

    def eval(self, tq):
        tq = np.asarray(tq, dtype=float)
        out = np.empty_like(tq)
        hist = tq <= 0.0
        if np.any(hist):
            out[hist] = self.history.log_value(tq[hist])
        rest = ~hist
        if not np.any(rest):
            return out
        n = self.n
        t_last = self.t[n - 1]
        tr = tq[rest]
        slack = 1e-9 * max(1.0, abs(t_last))
        beyond = tr > t_last + slack
        vals = np.empty_like(tr)
        if np.any(beyond):
            if self.provisional is None:
                raise RuntimeError(
                    f"internal error: dense output queried at t={tr[beyond].max()!r} "
                    f"beyond computed range {t_last!r}")
            vals[beyond] = self.provisional(tr[beyond])
        inside = ~beyond
        if np.any(inside):
            ti = np.minimum(tr[inside], t_last)
            if n == 1:
                vals[inside] = self.v[0]
            else:
                j = np.searchsorted(self.t[:n], ti, side="right") - 1
                j = np.clip(j, 0, n - 2)
                t0 = self.t[j]
                h = self.t[j + 1] - t0
                vals[inside] = _hermite((ti - t0) / h, h, self.v[j], self.v[j + 1],
                                        self.d[j], self.d[j + 1])
        out[rest] = vals
        return out


@dataclass
class Trajectory:
    """Dense solution on ``[-tau, T]`` stored as ``v = log x``.

    ``dlog`` holds ``x'/x`` at the mesh points (right derivative at 0).
    Evaluation never extrapolates outside the computed range.
    """

    t: np.ndarray
    v: np.ndarray
    dlog: np.ndarray
    history: HistoryFunction
    tau: float
    kind: str = "fde"
    metadata: dict = field(default_factory=dict)

    @property
    def t_start(self):
        return -self.tau

    @property
    def T(self):
        return float(self.t[-1])

    def _check(self, tq):
        tq = np.asarray(tq, dtype=float)
        slack = 1e-12 * max(1.0, self.T)
        if np.any(tq < -self.tau - slack) or np.any(tq > self.T + slack):
            raise ValueError(f"evaluation outside trajectory range [{-self.tau}, {self.T}]")
        return np.clip(tq, -self.tau, self.T)

    def _locate(self, tq):
        j = np.searchsorted(self.t, tq, side="right") - 1
        j = np.clip(j, 0, len(self.t) - 2)
        t0 = self.t[j]
        h = self.t[j + 1] - t0
        return j, (tq - t0) / h, h

    def log_x(self, t):
        """``v(t) = log x(t)``."""
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(self._check(t))
        out = np.empty_like(tq)
        hist = tq < 0.0
        if np.any(hist):
            out[hist] = self.history.log_value(tq[hist])
        rest = ~hist
        if np.any(rest):
            j, th, h = self._locate(tq[rest])
            out[rest] = _hermite(th, h, self.v[j], self.v[j + 1], self.dlog[j], self.dlog[j + 1])
        return float(out[0]) if scalar else out

    def dlog_x(self, t):
        """``x'(t) / x(t)``."""
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(self._check(t))
        out = np.empty_like(tq)
        hist = tq < 0.0
        if np.any(hist):
            eps = 1e-6 * max(1.0, self.tau)
            a = np.maximum(tq[hist] - eps, -self.tau)
            b = np.minimum(tq[hist] + eps, 0.0)
            out[hist] = (self.history.log_value(b) - self.history.log_value(a)) / (b - a)
        rest = ~hist
        if np.any(rest):
            j, th, h = self._locate(tq[rest])
            out[rest] = _hermite_deriv(th, h, self.v[j], self.v[j + 1], self.dlog[j], self.dlog[j + 1])
        return float(out[0]) if scalar else out

    def x(self, t):
        with np.errstate(over="ignore"):
            return np.exp(self.log_x(t))

    def log_xprime(self, t):
        """``log x'(t)`` (requires ``x' > 0``)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.dlog_x(t)) + self.log_x(t)

    def to_csv(self, path, include_x=True):
        cols = {"t": self.t, "v": self.v, "dlogx": self.dlog}
        if include_x:
            cols["x"] = [math.exp(v) if v < LOG_MAX else None for v in self.v]
        return write_csv(path, cols)


# --- right-hand sides ----------------------------------------------------------

def _lse(terms):
    m = terms.max()
    if not math.isfinite(m):
        return m
    return m + math.log(np.exp(terms - m).sum())


class _FDERate:
    """``v'(t) = exp(-v(t)) int mu(ds) exp(logf(v(t+s)))``."""

    def __init__(self, f, m):
        self.f = f
        self.m = m
        locs = m.atom_locations
        self.zero = locs == 0.0
        self.lag_locs = locs[~self.zero]
        logw = np.log(m.atom_weights)
        self.log_w_zero = _lse(logw[self.zero]) if np.any(self.zero) else None
        self.log_w_lag = logw[~self.zero]

    def __call__(self, t, v, dense):
        terms = []
        if self.log_w_zero is not None:
            terms.append(self.log_w_zero + float(self.f.logf(v)))
        if self.lag_locs.size:
            past = dense.eval(t + self.lag_locs)
            terms.extend(self.log_w_lag + self.f.logf(past))
        if self.m.density_pieces:
            def logg(s):
                s = np.asarray(s, dtype=float)
                vals = dense.eval(t + s)
                return self.f.logf(vals)
            terms.append(self.m.log_integrate(logg, atoms=False))
        return math.exp(_lse(np.asarray(terms, dtype=float)) - v)


class _ODERate:
    """``v' = exp(logf(v) - v) (M - eps/f)``."""

    def __init__(self, f, M, perturbation=None):
        self.f = f
        self.M = float(M)
        self.perturbation = perturbation

    def __call__(self, t, v, dense):
        g = math.exp(float(self.f.logf(v)) - v)
        if self.perturbation is None:
            return self.M * g
        return g * (self.M - float(self.perturbation.ratio_log(v)))


# --- stepping ----------------------------------------------------------------

def _rk4(rate, dense, t, v, k1, h):
    k2 = rate(t + 0.5 * h, v + 0.5 * h * k1, dense)
    k3 = rate(t + 0.5 * h, v + 0.5 * h * k2, dense)
    k4 = rate(t + h, v + h * k3, dense)
    return v + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _predictor(dense):
    """Extrapolate the last accepted segment (or a tangent line) forward."""
    n = dense.n
    tn, vn, dn = dense.t[n - 1], dense.v[n - 1], dense.d[n - 1]
    if n < 2:
        return lambda tq: vn + dn * (tq - tn)
    t0 = dense.t[n - 2]
    h = tn - t0
    y0, m0 = dense.v[n - 2], dense.d[n - 2]
    return lambda tq: _hermite((tq - t0) / h, h, y0, vn, m0, dn)


def _step(rate, dense, t, v, d, h, needs_pc, passes):
    """One RK4 step; returns ``(v_new, d_new)``."""
    if not needs_pc:
        v_new = _rk4(rate, dense, t, v, d, h)
        d_new = rate(t + h, v_new, dense)
        return v_new, d_new
    dense.provisional = _predictor(dense)
    try:
        v_new = _rk4(rate, dense, t, v, d, h)
        d_new = rate(t + h, v_new, dense)
        for _ in range(passes):
            dense.provisional = (lambda tq, v1=v_new, d1=d_new:
                                 _hermite((tq - t) / h, h, v, v1, d, d1))
            v_new = _rk4(rate, dense, t, v, d, h)
            d_new = rate(t + h, v_new, dense)
    finally:
        dense.provisional = None
    return v_new, d_new


def _breakpoints(m, T, levels=4):
    """Times ``sum of atom lags`` (up to ``levels`` terms) where the history kink at 0 propagates.

    The jump moves one derivative higher per level, so 4 levels cover RK4.
    """
    if m is None:
        return np.array([])
    lags = sorted({-float(a.location) for a in m.atoms if a.location < 0})
    pts = {0.0}
    frontier = {0.0}
    for _ in range(levels):
        frontier = {p + lag for p in frontier for lag in lags if p + lag <= T}
        pts |= frontier
    return np.array(sorted(p for p in pts if 0 < p < T))


def _fixed_mesh(T, h, breakpoints):
    """Uniform mesh ``k h`` merged with breakpoints; uniform nodes closer than
    ``h/4`` to a breakpoint are dropped."""
    n = int(math.ceil(T / h - 1e-9))
    uniform = np.arange(n + 1) * (T / n)
    if len(breakpoints) == 0:
        return uniform
    bp = np.asarray(breakpoints)
    idx = np.searchsorted(bp, uniform)
    near = np.zeros(len(uniform), dtype=bool)
    for off in (-1, 0):
        j = np.clip(idx + off, 0, len(bp) - 1)
        near |= np.abs(uniform - bp[j]) < 0.25 * h
    near[0] = near[-1] = False
    mesh = np.union1d(uniform[~near], bp)
    return mesh[(mesh >= 0) & (mesh <= T)]


def _integrate(rate, history, tau, T, sc, min_lag=math.inf, m=None):
    v0 = float(history.log_value(0.0))
    dense = _Dense(history, 0.0, v0)
    d0 = rate(0.0, v0, dense)
    dense.d[0] = d0
    if not math.isfinite(d0):
        raise StepFailure("right-hand side not finite at t=0", last_good_time=0.0)
    passes = sc.corrector_passes
    if sc.mode == "fixed":
        mesh = _fixed_mesh(T, sc.h, _breakpoints(m, T))
        h_max = float(np.max(np.diff(mesh)))
        needs_pc = m is not None and m.has_mass_in(-h_max * (1 + 1e-12), 0.0)
        t, v, d = 0.0, v0, d0
        for t_next in mesh[1:]:
            v_new, d_new = _step(rate, dense, t, v, d, t_next - t, needs_pc, passes)
            if not (math.isfinite(v_new) and math.isfinite(d_new)):
                raise StepFailure(f"non-finite state after step to t={t_next}", last_good_time=t)
            dense.append(t_next, v_new, d_new)
            t, v, d = t_next, v_new, d_new
    else:
        _adaptive(rate, dense, T, sc, m, passes, v0, d0)
    n = dense.n
    return dense.t[:n].copy(), dense.v[:n].copy(), dense.d[:n].copy()


def _adaptive(rate, dense, T, sc, m, passes, v0, d0):
    """Step-doubling RK4 with the local error estimate ``|v_2 - v_1| / 15``."""
    stops = np.append(_breakpoints(m, T), T)
    t, v, d = 0.0, v0, d0
    h = sc.h
    while t < T * (1 - 1e-14):
        nxt = stops[stops > t * (1 + 1e-14) + 1e-14][0]
        h = min(h, nxt - t)
        lags = [-a.location for a in m.atoms if a.location < 0] if m is not None else []
        if lags:
            h = min(h, min(lags))
        while True:
            if h < sc.h_min:
                raise StepFailure(f"step size fell below h_min={sc.h_min} at t={t}", last_good_time=t)
            needs_pc = m is not None and m.has_mass_in(-h * (1 + 1e-12), 0.0)
            v_big, _ = _step(rate, dense, t, v, d, h, needs_pc, passes)
            half = 0.5 * h
            v_mid, d_mid = _step(rate, dense, t, v, d, half, needs_pc, passes)
            dense.append(t + half, v_mid, d_mid)
            v_fine, d_fine = _step(rate, dense, t + half, v_mid, d_mid, half, needs_pc, passes)
            dense.n -= 1
            err = abs(v_fine - v_big) / 15.0
            scale = sc.tol * max(1.0, abs(v_fine))
            if math.isfinite(err) and err <= scale:
                dense.append(t + half, v_mid, d_mid)
                t_new = nxt if abs(t + h - nxt) <= 1e-12 * max(1.0, nxt) else t + h
                dense.append(t_new, v_fine, d_fine)
                t, v, d = t_new, v_fine, d_fine
                fac = 0.9 * (scale / err) ** 0.2 if err > 0 else 4.0
                h = h * min(4.0, max(0.2, fac))
                break
            fac = 0.9 * (scale / err) ** 0.2 if math.isfinite(err) and err > 0 else 0.25
            h = h * min(0.9, max(0.1, fac))


# --- public solvers ----------------------------------------------------------

def solve_ode(f: Nonlinearity, M: float, y0: float, T: float, sc: StepControl = StepControl(),
              perturbation: Perturbation | None = None) -> Trajectory:
    """Solve ``y' = M f(y) - eps(y)``, ``y(0) = y0`` (``eps = 0`` by default)."""
    if not (y0 > 0 and math.isfinite(y0)):
        raise ValidationError(f"y0 must be positive, got {y0!r}")
    if not T > 0:
        raise ValidationError(f"horizon T must be positive, got {T!r}")
    if not M > 0:
        raise ValidationError(f"M must be positive, got {M!r}")
    history = HistoryFunction.constant(y0)
    rate = _ODERate(f, M, perturbation)
    t, v, d = _integrate(rate, history, 0.0, T, sc)
    meta = {"f": f.descriptor, "M": M, "y0": y0}
    if perturbation is not None:
        meta["perturbation"] = perturbation.descriptor
    return Trajectory(t, v, d, history, 0.0, "ode", meta)


def solve_fde(f: Nonlinearity, m: DelayMeasure, psi: HistoryFunction | None = None, T: float = 100.0,
              sc: StepControl = StepControl()) -> Trajectory:
    """Solve ``x'(t) = int mu(ds) f(x(t+s))`` with ``x = psi`` on ``[-tau, 0]``."""
    psi = HistoryFunction.constant(1.0) if psi is None else psi
    if not T > 0:
        raise ValidationError(f"horizon T must be positive, got {T!r}")
    if sc.mode == "fixed" and sc.h > m.tau / 4 * (1 + 1e-12):
        raise ValidationError(f"fixed step h={sc.h} exceeds tau/4={m.tau / 4}")
    psi.validate(m.tau)
    rate = _FDERate(f, m)
    t, v, d = _integrate(rate, psi, m.tau, T, sc, m=m)
    meta = {"f": f.descriptor, "measure": m.to_dict(), "history": psi.descriptor}
    return Trajectory(t, v, d, psi, m.tau, "fde", meta)
