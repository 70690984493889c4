"""``F(x) = int_1^x du / f(u)`` and its inverse, both in ``u = log x``.

With ``x = e^u``, ``F(e^u) = int_0^u exp(v - log f(e^v)) dv``; the integrand
stays representable even when ``e^u`` is not.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, QuadratureError, ValidationError
from .nonlinearity import Nonlinearity
from .quadrature import adaptive_gl
from .series import DiagnosticSeries, extrapolate_limit, geometric_grid

U_FLOOR = -700.0


class RateTransform:
    """Lazily tabulated ``F`` with exact local re-quadrature.

    Knots ``u_k`` carry cumulative values ``F(e^{u_k})``.  A query integrates
    only from the nearest knot, so results are accurate to ``rtol`` whatever
    the knot spacing.  Knots are extended on demand under a lock; readers
    always see a consistent monotone table.
    """

    def __init__(self, f: Nonlinearity, rtol=1e-9, inv_rtol=1e-13, inv_atol=1e-12,
                 base_u=0.0, u_cap=1e8):
        if base_u != 0.0 and not f.test_only:
            raise ValidationError("the lower limit of F may only be moved for test-only families")
        self.source = f
        self.rtol = rtol
        self.inv_rtol = inv_rtol
        self.inv_atol = inv_atol
        self.base_u = float(base_u)
        self.u_cap = float(u_cap)
        self._u = np.array([self.base_u])
        self._F = np.array([0.0])
        self._lock = threading.Lock()
        self._inverse = None

    # --- integrand and knot table ------------------------------------------

    def dF_du(self, u):
        """``d F(e^u) / du = e^u / f(e^u)``."""
        return np.exp(np.asarray(u, dtype=float) - self.source.logf(u))

    def _segment(self, a, b):
        if a == b:
            return 0.0
        try:
            return adaptive_gl(self.dF_du, a, b, rtol=self.rtol, atol=0.0)
        except QuadratureError as exc:
            raise QuadratureError(f"F quadrature failed on u in [{a}, {b}]: {exc}",
                                  interval=(a, b)) from exc

    @staticmethod
    def _spacing(u):
        return max(0.25, 0.05 * abs(u))

    def _extend_up(self, u_target=None, F_target=None):
        with self._lock:
            us, Fs = list(self._u), list(self._F)
            grew = False
            while (u_target is not None and us[-1] < u_target) or \
                  (F_target is not None and Fs[-1] < F_target):
                if us[-1] >= self.u_cap:
                    raise DomainError(f"F target beyond supported range u <= {self.u_cap:g}")
                nxt = min(us[-1] + self._spacing(us[-1]), self.u_cap)
                if u_target is not None and F_target is None:
                    nxt = min(nxt, max(u_target, us[-1]))
                Fs.append(Fs[-1] + self._segment(us[-1], nxt))
                us.append(nxt)
                grew = True
            if grew:
                self._u, self._F = np.array(us), np.array(Fs)
                self._inverse = None

    def _extend_down(self, u_target=None, F_target=None):
        with self._lock:
            us, Fs = list(self._u), list(self._F)
            grew = False
            while (u_target is not None and us[0] > u_target) or \
                  (F_target is not None and Fs[0] > F_target):
                if us[0] <= U_FLOOR:
                    raise DomainError(
                        f"t = {F_target!r} lies below the range of F (F(0+) ~ {Fs[0]:.6g})")
                nxt = max(us[0] - self._spacing(us[0]), U_FLOOR)
                if u_target is not None and F_target is None:
                    nxt = max(nxt, min(u_target, us[0]))
                Fs.insert(0, Fs[0] - self._segment(nxt, us[0]))
                us.insert(0, nxt)
                grew = True
            if grew:
                self._u, self._F = np.array(us), np.array(Fs)
                self._inverse = None

    def _table(self):
        return self._u, self._F

    @property
    def knots(self):
        u, F = self._table()
        return u.copy(), F.copy()

    # --- F -------------------------------------------------------------------

    def compute_F(self, u):
        """``F(e^u)``; accepts scalars or arrays."""
        if np.ndim(u):
            return np.array([self.compute_F(float(x)) for x in np.ravel(u)]).reshape(np.shape(u))
        u = float(u)
        if not math.isfinite(u):
            raise DomainError(f"u must be finite, got {u!r}")
        if u > self._u[-1]:
            self._extend_up(u_target=u)
        elif u < self._u[0]:
            if u < U_FLOOR:
                raise DomainError(f"u = {u} below supported floor {U_FLOOR}")
            self._extend_down(u_target=u)
        us, Fs = self._table()
        k = int(np.searchsorted(us, u))
        k = min(max(k, 0), len(us) - 1)
        # integrate from the closer neighbouring knot
        if k > 0 and (u - us[k - 1]) < (us[k] - u):
            k -= 1
        return float(Fs[k] + self._segment(us[k], u))

    def compute_F_x(self, x):
        x = float(x)
        if not x > 0:
            raise DomainError(f"F is defined for x > 0, got {x}")
        return self.compute_F(math.log(x))

    # --- inverse -------------------------------------------------------------

    def _inverse_guess(self, t):
        with self._lock:
            if self._inverse is None or self._inverse[0] is not self._F:
                us, Fs = self._u, self._F
                interp = PchipInterpolator(Fs, us) if len(us) >= 2 else None
                self._inverse = (Fs, interp)
            interp = self._inverse[1]
        return None if interp is None else float(interp(t))

    def invert_F(self, t):
        """Return ``u`` with ``F(e^u) = t``.

        Bracketing on the knot table, then Newton steps on ``u -> F(e^u)``
        that fall back to bisection whenever they leave the bracket.
        """
        if np.ndim(t):
            return np.array([self.invert_F(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        t = float(t)
        if not math.isfinite(t):
            raise DomainError(f"t must be finite, got {t!r}")
        if t > self._F[-1]:
            self._extend_up(F_target=t)
        elif t < self._F[0]:
            self._extend_down(F_target=t)
        us, Fs = self._table()
        k = int(np.searchsorted(Fs, t))
        if k < len(Fs) and Fs[k] == t:
            return float(us[k])
        lo, hi = us[k - 1], us[k]
        F_lo = Fs[k - 1]
        tol = max(self.inv_atol, self.inv_rtol * abs(t))
        u = self._inverse_guess(t)
        if u is None or not (lo < u < hi):
            u = 0.5 * (lo + hi)
        for _ in range(200):
            resid = F_lo + self._segment(lo, u) - t
            if abs(resid) <= tol:
                return u
            if resid > 0:
                hi = u
            else:
                lo, F_lo = u, resid + t
            step = resid / float(self.dF_du(u))
            cand = u - step
            if not (lo < cand < hi):
                cand = 0.5 * (lo + hi)
            if hi - lo <= 4 * np.spacing(max(abs(lo), abs(hi), 1.0)):
                return 0.5 * (lo + hi)
            u = cand
        raise DomainError(f"inversion of F did not converge for t = {t}")

    def invert_F_x(self, t):
        """``F^{-1}(t)`` as a plain number (may overflow to ``inf``)."""
        with np.errstate(over="ignore"):
            return float(np.exp(self.invert_F(t)))


def check_F_asymptotics(rt: RateTransform, alpha: float, u_max: float, u_min: float = 10.0,
                        n: int = 25) -> tuple[DiagnosticSeries, object]:
    """Series ``F(e^u)(1 + alpha) / u^(alpha + 1)`` on a geometric grid, with its limit.

    The limit is Aitken-extrapolated; for the log-power family the correction is
    ``O(u^-(alpha + 1))``, geometric on this grid.
    """
    u = geometric_grid(u_min, u_max, n)
    vals = np.array([rt.compute_F(x) for x in u]) * (1.0 + alpha) / u ** (alpha + 1.0)
    series = DiagnosticSeries("F_asymptotic_ratio", u, vals, {"alpha": alpha})
    return series, extrapolate_limit(series, "aitken")
