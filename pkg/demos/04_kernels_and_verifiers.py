"""Kernel families and the sampling-based estimate verifiers.

Three builtins: standard_product saturates the size condition with ratio
exactly c (oscillation off), b_annihilating kills Theta b identically, and
the violator K = 1 fails everything. The verifiers report worst ratios
|LHS|/RHS with reproducible witnesses for the size / Holder / mixed modes
and for the Carleson-box assumptions.
"""

import numpy as np

from dyadica import kernel as kn
from dyadica import lattice as lt
from dyadica import measure as ms

print(__doc__)

lam = ms.power_law_dominating(2.0, 1.0)
M_n = ms.preset_measure("uniform", 1, 3)
M_m = ms.preset_measure("uniform", 1, 3)

print("== standard_product saturates the size bound ==")
K_flat = kn.make_builtin(
    "standard_product", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam, c=0.5, sign_factor=False)
)
plan = kn.SamplePlan(M_n, M_m, count=200, seed=1)
print("size ratio (oscillation off):", kn.verify_estimates(K_flat, "size", plan).max_ratio)

K = kn.make_builtin("standard_product", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam, c=1.0))
for mode in ("size", "holder", "mixed_y2", "mixed_y1"):
    rep = kn.verify_estimates(K, mode, plan)
    print(f"{mode:9s}: max ratio {rep.max_ratio:8.4f}  (rejected {rep.rejected} constrained samples)")

print("\n== the violator has no decay ==")
Kv = kn.make_builtin("violator", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam))
rep = kn.verify_estimates(Kv, "size", kn.SamplePlan(M_n, M_m, count=200, seed=2), constant=4.0)
print("max size ratio:", rep.max_ratio, "pass at constant 4:", rep.passed)
print("witness:", rep.witness)

print("\n== b_annihilating sends b to zero ==")
b1 = ms.preset_b("random-accretive", M_n, seed=3)
b2 = ms.preset_b("random-accretive", M_m, seed=4)
Ka = kn.make_builtin(
    "b_annihilating", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam, b1=b1, b2=b2, M_n=M_n, M_m=M_m)
)
theta_b = kn.apply_theta(Ka, np.outer(b1, b2), M_n, M_m, 0.3, 0.7)
print("max |Theta b| over the grid:", np.max(np.abs(theta_b)))

print("\n== Carleson-box estimates ==")
lat_n = lt.build_lattice(1, 3, 5, r=5, gamma=0.25)
lat_m = lt.build_lattice(1, 3, 6, r=5, gamma=0.25)
cplan = kn.CubePlan(lat_n, lat_m, cubes_per_level=2, exterior_samples=4, G=4, seed=7)
for mode in ("size", "holder"):
    rep = kn.verify_carleson_assumptions(K, b1, b2, M_n, M_m, mode, cplan)
    print(f"carleson {mode:6s}: max ratio {rep.max_ratio:.4f} at {rep.witness['orientation']}")
