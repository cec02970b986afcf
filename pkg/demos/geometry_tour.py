"""Anisotropic radii on the egg |z1|^2 + |z2|^4 < 1.

At the weakly pseudoconvex point (1, 0) the tangent radius grows like eps^(1/4),
at the strongly pseudoconvex point (0, 1) like eps^(1/2). The polydiscs built
from these radii define a quasi-symmetric pseudodistance.
"""

import numpy as np

from lincvx import catalog, extremal_basis, pseudodistance, tau
from lincvx.geometry import exponent_fit, quasi_symmetry

egg = catalog("EGG24")
for zeta in ([1, 0], [0, 1]):
    zeta = np.array(zeta, complex)
    fr = extremal_basis(egg, zeta, 1e-4)
    slopes, _ = exponent_fit(egg, zeta, 1e-6)
    print(f"zeta={zeta}: radii at eps=1e-4 {np.round(fr.radii, 5)}, tangent exponent {slopes[1]:.3f}")

print("tau((1,0), e2, 1e-4) =", tau(egg, np.array([1, 0], complex), np.array([0, 1], complex), 1e-4))

z, w = np.array([0.999, 0.0], complex), np.array([0.999, 0.05], complex)
print(f"d(z, w) = {pseudodistance(egg, z, w):.4g}, d(w, z) = {pseudodistance(egg, w, z):.4g}")
print("max asymmetry over 100 collar pairs:", round(quasi_symmetry(egg, 100)["max_ratio"], 3))
