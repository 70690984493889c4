"""
How fast does a delayed sublinear equation grow?
================================================

x'(t) = f(x(t)) + f(x(t-1)),  f(x) = (x+1)/log(2+x),  x = 1 on [-1, 0].

Without the delay the solution would be F^{-1}(2t).  The delayed term lags
behind, and the ratio x(t) / F^{-1}(2t) settles at exp(-lambda C) with
lambda = lim f(x) log(x)/x = 1 and C = 1.
"""

import math

import numpy as np

from fdegrowth import (DelayMeasure, RateTransform, StepControl, extrapolate_limit,
                       make_paper_example, ratio_series, solve_fde, time_grid)

f = make_paper_example(1.0)
m = DelayMeasure(1.0, atoms=((0.0, 1.0), (-1.0, 1.0)))

# everything is integrated in v = log x; x(1000) is about e^90
x = solve_fde(f, m, T=1000.0, sc=StepControl(h=0.0625))
print("log x(1000) =", x.log_x(1000.0))

rt = RateTransform(f)
s = ratio_series(x, rt, M=2.0, grid=time_grid(1000.0, 25))
for t, r in list(zip(s.t, s.values))[::6]:
    print(f"  t = {t:7.1f}   x/F^-1(2t) = {r:.5f}")

# the approach is slow (corrections ~ 1/log x), so extrapolate
for model in ("raw", "log-fit"):
    est = extrapolate_limit(s, model)
    print(f"{model:8s} limit {est.estimate:.5f} +- {est.uncertainty:.1e}")
print("predicted     ", round(math.exp(-1.0), 5))

# the same run, spread over a longer delay: C = 2
x2 = solve_fde(f, DelayMeasure.dirac(-2.0), T=1000.0)
s2 = ratio_series(x2, rt, M=1.0, grid=time_grid(1000.0, 25))
print("atom at -2:", extrapolate_limit(s2).estimate, "vs", math.exp(-2.0))
