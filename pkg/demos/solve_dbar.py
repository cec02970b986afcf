"""Solve dbar u = f - g on the unit ball for f = dbar(zbar1 zbar2) and check it.

u and g are kernel integrals evaluated lazily; the Koppelman identity
f = dbar u + g is confirmed at a probe by finite differences.
"""

import numpy as np

from lincvx import KernelAssembly, catalog, dbar_solve, koppelman_check
from lincvx.quadrature import QuadratureSpec
from lincvx.solvers import dbar_family

ball = catalog("BALL2")
asm = KernelAssembly(ball, K0=3.0)
quad = QuadratureSpec(ball, 0)
name, f = dbar_family(2)[1]
u, g = dbar_solve(asm, f, quad)
z = np.array([[0.2, 0.1j]])
print(f"f = {name}: u(z) = {u(z)[0]}, g(z) = {g(z)[0]}")
rep = koppelman_check(asm, f, z, quad)
print("Koppelman relative residual:", rep.residuals["max_relative"])
