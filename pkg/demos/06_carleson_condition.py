"""The bi-parameter Carleson condition and its supporting machinery.

C_IJ is the Theta-b energy over the double Whitney region W_I x W_J. The
checker maximizes sum_{I x J in Omega} C_IJ / mu(Omega) over random unions
of dyadic rectangles; the violator kernel is caught by the full square
with a closed-form ratio, while the b-annihilating kernel passes at any
constant. Also shown: the dyadic Carleson embedding (ratio <= 4), the
Schur matrix bound, geometric-decay diagnostics, and the strong maximal
function with the layer-cake index inclusion.
"""

import math

import numpy as np

from dyadica import calibration as cb
from dyadica import carleson as cl
from dyadica import kernel as kn
from dyadica import lattice as lt
from dyadica import measure as ms

print(__doc__)

lam = ms.power_law_dominating(2.0, 1.0)
M_n = ms.preset_measure("uniform", 1, 4)
M_m = ms.preset_measure("uniform", 1, 4)
lat_n = lt.build_lattice(1, 4, 1, r=5, gamma=0.25)
lat_m = lt.build_lattice(1, 4, 2, r=5, gamma=0.25)

print("== the violator against the full square ==")
Kv = kn.make_builtin("violator", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam))
ones = np.ones(16)
table_v = cl.carleson_table(Kv, ones, ones, M_n, M_m, lat_n, lat_m, G=4)
rep = cl.biparameter_carleson_check(
    table_v, M_n, M_m, cl.OmegaPlan(count=10, seed=3), constant=2.0,
    extra_omegas=[cl.full_square_omega(lat_n, lat_m, M_n, M_m)],
)
print("max Omega ratio:", rep.value, " closed form 25 (log 2)^2 =", 25 * math.log(2.0) ** 2)
print("flagged at constant 2.0:", not rep.passed)

print("\n== the annihilator passes at any constant ==")
b1 = ms.preset_b("random-accretive", M_n, seed=4)
b2 = ms.preset_b("random-accretive", M_m, seed=5)
Ka = kn.make_builtin(
    "b_annihilating", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam, b1=b1, b2=b2, M_n=M_n, M_m=M_m)
)
table_a = cl.carleson_table(Ka, b1, b2, M_n, M_m, lat_n, lat_m, G=4)
rep_a = cl.biparameter_carleson_check(table_a, M_n, M_m, cl.OmegaPlan(count=10, seed=6), constant=1e-10)
print("max Omega ratio:", rep_a.value, " pass:", rep_a.passed)

print("\n== dyadic Carleson embedding ==")
rng = np.random.default_rng(7)
worst = 0.0
for i in range(100):
    nu = ms.preset_measure("random-dirichlet", 1, 4, seed=100 + i)
    lattice = lt.build_lattice(1, 4, i, r=5, gamma=0.25)
    a = cl.greedy_carleson_sequence(lattice, nu, rng)
    rep_e = cl.carleson_embedding_check(lattice, a, nu, rng.normal(size=16))
    worst = max(worst, rep_e.value)
print("worst ratio over 100 saturating instances:", worst, "(bound 4)")

print("\n== Schur coefficients ==")
lam_i, M_i, lat_i = cb.schur_instance(4, 1, 99)
A = cl.schur_matrix(cb.SCHUR_ALPHA, lam_i, M_i, lat_i).values
x = rng.uniform(0, 1, A.shape[0])
y = rng.uniform(0, 1, A.shape[0])
val = float(x @ A @ y)
print("random ratio:", val * val / float((x @ x) * (y @ y)), " frozen C_S:", cb.SCHUR_CS)
print("maximized ratio (alternating ascent):", cl.schur_maximize(A))

print("\n== geometric decay of the complement integrals ==")
M6 = ms.preset_measure("uniform", 1, 6)
lat6 = lt.build_lattice(1, 6, 3, r=5, gamma=0.25)
good = [c for c in lat6.cubes(6) if lat6.is_good(c)][0]
repk = cl.diag_decay(good, 5, lam, 1.0, M6, G=4)
print("F_k / 2^(-k/2) for k = 1..5:", [round(v, 4) for v in repk.ratios])

print("\n== strong maximal function and the layer cake ==")
M2 = ms.preset_measure("uniform", 1, 2)
lat0 = lt.ShiftedLattice(1, 2, lt.ShiftBits.zero(1, 2), 1, 0.25)
f = np.zeros((4, 4))
f[:2, :2] = 1.0
msf = cl.strong_maximal(f, M2, M2, lat0, lat0)
print("M_s f at the far corner:", msf[3, 3], "(the best rectangle is the full square)")
K = kn.make_builtin("standard_product", dict(alpha=1, beta=1, lam_n=lam, lam_m=lam, c=1.0))
table = cl.carleson_table(K, np.ones(4), np.ones(4), M2, M2, lat0, lat0, G=3)
value, avgs, msf2 = cl.sigma_car_car(rng.normal(size=(4, 4)), table, M2, M2)
print("Sigma_{Car,Car} quantity:", value)
