"""Adaptive Gauss-Legendre quadrature.

Fixed-order Gauss-Legendre rule on each panel; a panel is accepted when the
single-panel estimate agrees with the sum over its two halves.  The integrand
must accept a 1-D numpy array of nodes and return an array of the same shape.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureError

DEFAULT_ORDER = 10


@lru_cache(maxsize=8)
def gauss_legendre(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def fixed_gl(func, a, b, order=DEFAULT_ORDER):
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return half * np.dot(weights, func(mid + half * nodes))


def adaptive_gl(func, a, b, rtol=1e-10, atol=0.0, order=DEFAULT_ORDER,
                max_depth=40, max_panels=20000, label=None):
    """Integrate ``func`` over ``[a, b]``.

    The acceptance test on a panel is ``|I_coarse - I_fine| <= max(atol_panel,
    rtol * |I_fine|, rtol_panel)`` where the absolute shares (of ``atol`` and
    of ``rtol`` times the whole-interval estimate) are proportional to panel
    width.
    Panels are refined depth-first.

    Raises
    ------
    QuadratureError
        When some panel cannot be resolved within ``max_depth`` bisections.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    nodes, weights = gauss_legendre(order)
    width = b - a

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (lo + hi)
        return half * np.dot(weights, func(mid + half * nodes))

    total = 0.0
    first = panel(a, b)
    scale = None  # global magnitude, from the first bisection
    stack = [(a, b, first, 0)]
    evaluated = 0
    while stack:
        lo, hi, coarse, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = panel(lo, mid)
        right = panel(mid, hi)
        fine = left + right
        evaluated += 1
        if not np.isfinite(fine):
            raise QuadratureError(
                f"non-finite integrand on [{lo!r}, {hi!r}]"
                + (f" ({label})" if label else ""), interval=(lo, hi))
        if scale is None:
            scale = abs(fine)
        err = abs(fine - coarse)
        share = (hi - lo) / width
        tol = max(atol * share, rtol * abs(fine), rtol * scale * share)
        # the second test stops at roundoff of the whole integral (endpoint singularities)
        if err <= tol or err <= 1e-15 * max(abs(fine), scale):
            total += fine
            continue
        if depth >= max_depth or evaluated > max_panels:
            raise QuadratureError(
                f"quadrature did not converge on [{lo!r}, {hi!r}]"
                + (f" ({label})" if label else "")
                + f": error estimate {err:.3g} > tolerance {tol:.3g}",
                interval=(lo, hi))
        stack.append((mid, hi, right, depth + 1))
        stack.append((lo, mid, left, depth + 1))
    return sign * total
