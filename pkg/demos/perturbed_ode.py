"""
Perturbed versus unperturbed growth.

x' = f(x) - eps(x) and y' = f(y) grow together up to a constant factor
exp(-mu), with mu the limit of (f(x)/x) * int_0^x eps/f^2.  With
eps = c f f' that limit is c for the log-power family at alpha = 1.
"""

import math

from fdegrowth import compute_hw_mu, hw_experiment, make_paper_example, make_perturbation

f = make_paper_example(1.0)

for c in (0.5, 2.0):
    eps = make_perturbation(f, {"kind": "scaled-ffprime", "c": c})
    mu = compute_hw_mu(f, eps)
    v = hw_experiment(f, eps, x0=1.0, y0=1.0, T=1000.0)
    print(f"c={c}: mu={mu.estimate:.5f}  x/y -> {v.estimated:.5f}  exp(-mu)={math.exp(-mu.estimate):.5f}  {v.status}")

# eps = c f does not vanish relative to f: mu is infinite and nothing is predicted
eps = make_perturbation(f, {"kind": "scaled-f", "c": 0.5})
print(compute_hw_mu(f, eps).note)
