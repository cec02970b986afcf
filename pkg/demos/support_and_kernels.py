"""Holomorphic support function, its Hefer decomposition and the weighted kernel.

S0(., zeta) vanishes at zeta, is holomorphic in z, and has Re S0 < 0 where
rho(z) < rho(zeta) nearby. The kernel weight rho + S/K0 stays below rho/2.
"""

import numpy as np

from lincvx import KernelAssembly, Support, SupportParams, calibrate_K0, catalog, hefer_divide, verify_local_estimate

ball = catalog("BALL2")
sup = Support(ball, SupportParams())
zeta = np.array([1, 0], complex)
z = zeta + np.array([-0.01, 0.02j])
print("S0(zeta, zeta) =", sup(zeta[None], zeta[None])[0])
print("S0(z, zeta)    =", sup(z[None], zeta[None])[0])

hd = hefer_divide(ball, SupportParams(), zeta)
Q = hd(z[None])[0]
print("Hefer factors Q(z) =", np.round(Q, 6), " sum Q_i (z_i - zeta_i) =", np.dot(Q, z - zeta))

for name in ("BALL2", "EGG24", "TUBE4"):
    rep = verify_local_estimate(catalog(name), SupportParams(), 4000)
    print(f"local estimate on {name}: passed={rep.passed} h_min={rep.h_min:.3g}")

asm = KernelAssembly(catalog("EGG24"))
K0, inf = calibrate_K0(asm, 2000, fresh=2000)
print(f"EGG24: K0 = {K0:.3g}, violations on fresh pairs = {inf['violations']}")
