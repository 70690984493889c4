"""
Spread-out delays.

Mass M and first moment C of the delay measure are all that matter in the
limit.  Here a uniform density on [-1, 0] plus an undelayed atom: M = 2,
C = 1/2, so the ratio should head to exp(-1/2).  The delay defect
M f(x) - x' is close to M C f(x) f'(x).
"""

import math

from fdegrowth import (DelayMeasure, HistoryFunction, RateTransform, StepControl,
                       delay_moment, delta_series, extrapolate_limit, make_paper_example,
                       ratio_series, solve_fde, time_grid, total_mass)

f = make_paper_example(1.0)
m = DelayMeasure(1.0, atoms=((0.0, 1.0),),
                 density_pieces=((-1.0, 0.0, "constant", {"value": 1.0}),))
M, C = total_mass(m), delay_moment(m)
print("M =", M, " C =", C)

psi = HistoryFunction(expression="1 + s**2")   # any positive start works
T = 400.0
x = solve_fde(f, m, psi, T, StepControl(h=0.0625))
grid = time_grid(T, 20)

s = ratio_series(x, RateTransform(f), M, grid)
print("ratio limit", round(extrapolate_limit(s).estimate, 4), "vs", round(math.exp(-C), 4))

d = delta_series(x, f, m, grid)
print("defect / (M C f f') at T:", round(float(d.values[-1]), 4))
