"""Primitive of a closed positive (1,1)-current and the divisor of z2 on the ball.

The radial homotopy gives w with dw = Theta. The smoothed divisor currents
i ddbar log(|z2|^2 + s^2) concentrate on {z2 = 0}, whose distance-weighted
area is pi/3.
"""

import numpy as np

from lincvx import catalog, poincare_d_solve
from lincvx.poly import Poly
from lincvx.solvers import blaschke_check, d_residual, divisor_integral, random_psh_current

theta = random_psh_current(2, seed=1)
w = poincare_d_solve(theta)
Z = np.random.default_rng(0).normal(size=(5, 2)) * 0.3 + 0j
print("max |dw - Theta| at 5 points:", d_residual(w, theta, Z))

ball = catalog("BALL2")
h = Poly(2, {((0, 1), (0, 0)): 1.0})
print(f"int_X delta dmu = {divisor_integral(ball, h):.10f} (pi/3 = {np.pi / 3:.10f})")
rep = blaschke_check(ball, h, (0.2, 0.1, 0.05), level=1)
print("smoothed values:", {s: round(v, 5) for s, v in rep.constants["smoothed"].items()},
      "target c*pi/3:", round(rep.constants["target"], 5))
