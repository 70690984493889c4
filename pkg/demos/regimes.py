"""
Three regimes of f(x) = (x+1)/log^alpha(2+x)
--------------------------------------------
"""

import numpy as np

from fdegrowth import (DelayMeasure, LogGrid, RateTransform, check_F_asymptotics,
                       check_rv_index_fprime, estimate_lambda, make_paper_example,
                       verify_growth_rate)

grid = LogGrid(u_min=10, u_max=1e4, n=61)

for alpha in (0.5, 1.0, 2.0):
    f = make_paper_example(alpha)
    lam = estimate_lambda(f, grid)
    rv = check_rv_index_fprime(f, sigma=2.0, grid=grid)
    print(f"alpha={alpha:<4g} lambda: {lam.label():12s} f'(2x)/f'(x) -> {rv.limit:.4f} ({rv.verdict})")

# F(e^u) grows like u^(alpha+1)/(alpha+1)
for alpha in (1.0, 2.0):
    series, _ = check_F_asymptotics(RateTransform(make_paper_example(alpha)), alpha, 1e4, n=7)
    print(f"alpha={alpha:g}", np.round(series.values, 9))

# lambda = 0: no correction; lambda = inf: the ratio drains to 0
m = DelayMeasure(1.0, ((0.0, 1.0), (-1.0, 1.0)))
for alpha in (2.0, 0.5):
    v = verify_growth_rate(make_paper_example(alpha), m, T=1000.0)
    print(f"alpha={alpha:g}: regime {v.regime}, estimate {v.estimated:.4g}, {v.status}")
