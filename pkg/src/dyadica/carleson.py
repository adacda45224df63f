"""Bi-parameter Carleson machinery, embedding, Schur bounds, diagnostics.

C_IJ is the Theta-b energy over the double Whitney region W_I x W_J; for
tensor-product kernels it factors as P_I * Q_J, which the table builder
exploits. The bi-parameter Carleson checker tests sums of C_IJ over
rectangle pairs contained in random unions Omega of dyadic rectangles
against mu(Omega). The dyadic Carleson embedding, Schur matrix of
scale-and-distance coefficients, geometric-decay diagnostics and the
dyadic strong maximal function live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kernel import KernelSpec, size_denominator
from .lattice import Cube, ShiftedLattice, level_whitney_nodes
from .measure import DominatingFunction, FactorMeasure
from .parallel import ordered_map
from .reports import VerificationReport
from .torus import arc_gap_cells


class CarlesonError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cube enumeration helpers


def cube_ids(lat: ShiftedLattice):
    """All cubes of the lattice with contiguous integer ids, level-major."""
    cubes = lat.all_cubes()
    index = {(c.level, c.index): i for i, c in enumerate(cubes)}
    return cubes, index


def _cube_cell_matrix(lat: ShiftedLattice) -> np.ndarray:
    """(num_cubes, num_cells) 0/1 membership of finest cells in each cube."""
    cubes = lat.all_cubes()
    N = 1 << (lat.L * lat.n)
    out = np.zeros((len(cubes), N))
    for i, c in enumerate(cubes):
        out[i, c.cell_indices()] = 1.0
    return out


# ---------------------------------------------------------------------------
# Carleson coefficients


def _whitney_energy_profile(K: KernelSpec, factor: int, b_vals, M: FactorMeasure, lat: ShiftedLattice, G: int) -> np.ndarray:
    """P over all cubes: P_I = int over W_I of |(K_factor (b mu))(x,t)|^2 dmu dt/t."""
    X = M.cell_centers()
    bw = np.asarray(b_vals).ravel() * M.weights
    fac = K.factor1 if factor == 1 else K.factor2
    cubes = lat.all_cubes()
    P = np.zeros(len(cubes))
    per_level_cell = {}
    for level in range(lat.L + 1):
        nodes, wts = level_whitney_nodes(level, G)
        dens = np.zeros(M.num_cells)
        for t, w in zip(nodes, wts):
            u = fac(float(t), X, X) @ bw
            dens += w * M.weights * np.abs(u) ** 2
        per_level_cell[level] = dens
    for i, c in enumerate(cubes):
        P[i] = per_level_cell[c.level][c.cell_indices()].sum()
    return P


@dataclass(frozen=True)
class CarlesonTable:
    """C_IJ over all cube pairs of the two lattices."""

    lat_n: ShiftedLattice
    lat_m: ShiftedLattice
    values: np.ndarray  # (num_cubes_n, num_cubes_m)
    G: int

    def lookup(self, I: Cube, J: Cube) -> float:
        _, idx_n = cube_ids(self.lat_n)
        _, idx_m = cube_ids(self.lat_m)
        return float(self.values[idx_n[(I.level, I.index)], idx_m[(J.level, J.index)]])


def carleson_coefficient(K: KernelSpec, b1, b2, M_n, M_m, I: Cube, J: Cube, G: int = 4) -> float:
    """C_IJ for a single pair, by direct Whitney-pair quadrature."""
    if K.factorized:
        latI, latJ = I.lattice, J.lattice
        X1, X2 = M_n.cell_centers(), M_m.cell_centers()
        b1w = np.asarray(b1).ravel() * M_n.weights
        b2w = np.asarray(b2).ravel() * M_m.weights
        n1, w1 = level_whitney_nodes(I.level, G)
        n2, w2 = level_whitney_nodes(J.level, G)
        cells1, cells2 = I.cell_indices(), J.cell_indices()
        P = 0.0
        for t, w in zip(n1, w1):
            u = K.factor1(float(t), X1, X1) @ b1w
            P += w * float((M_n.weights[cells1] * np.abs(u[cells1]) ** 2).sum())
        Q = 0.0
        for t, w in zip(n2, w2):
            v = K.factor2(float(t), X2, X2) @ b2w
            Q += w * float((M_m.weights[cells2] * np.abs(v[cells2]) ** 2).sum())
        return P * Q
    from .kernel import apply_theta

    B = np.outer(np.asarray(b1).ravel(), np.asarray(b2).ravel())
    n1, w1 = level_whitney_nodes(I.level, G)
    n2, w2 = level_whitney_nodes(J.level, G)
    cells1, cells2 = I.cell_indices(), J.cell_indices()
    acc = 0.0
    for t1, a in zip(n1, w1):
        for t2, b in zip(n2, w2):
            Th = apply_theta(K, B, M_n, M_m, float(t1), float(t2))
            blk = np.abs(Th[np.ix_(cells1, cells2)]) ** 2
            acc += a * b * float(
                np.einsum("ij,i,j->", blk, M_n.weights[cells1], M_m.weights[cells2])
            )
    return acc


def carleson_table(K: KernelSpec, b1, b2, M_n, M_m, lat_n: ShiftedLattice, lat_m: ShiftedLattice, G: int = 4) -> CarlesonTable:
    """The full C_IJ table. Tensor kernels factor into P_I * Q_J."""
    if not K.factorized:
        cubes_n = lat_n.all_cubes()
        cubes_m = lat_m.all_cubes()
        vals = np.zeros((len(cubes_n), len(cubes_m)))
        for i, I in enumerate(cubes_n):
            for j, J in enumerate(cubes_m):
                vals[i, j] = carleson_coefficient(K, b1, b2, M_n, M_m, I, J, G)
        return CarlesonTable(lat_n, lat_m, vals, G)
    P = _whitney_energy_profile(K, 1, b1, M_n, lat_n, G)
    Q = _whitney_energy_profile(K, 2, b2, M_m, lat_m, G)
    return CarlesonTable(lat_n, lat_m, np.outer(P, Q), G)


# ---------------------------------------------------------------------------
# Omega sets and the bi-parameter condition


@dataclass(frozen=True)
class OmegaSet:
    """A finite union of dyadic rectangles I x J (admissible by construction)."""

    rectangles: tuple  # of (Cube, Cube)
    mask: np.ndarray  # (cells_n, cells_m) bool
    mass: float


def make_omega(rectangles, M_n: FactorMeasure, M_m: FactorMeasure) -> OmegaSet:
    mask = np.zeros((M_n.num_cells, M_m.num_cells), dtype=bool)
    for I, J in rectangles:
        mask[np.ix_(I.cell_indices(), J.cell_indices())] = True
    mass = float(np.einsum("ij,i,j->", mask.astype(float), M_n.weights, M_m.weights))
    return OmegaSet(rectangles=tuple(rectangles), mask=mask, mass=mass)


def full_square_omega(lat_n: ShiftedLattice, lat_m: ShiftedLattice, M_n, M_m) -> OmegaSet:
    return make_omega([(lat_n.cube(0, (0,) * lat_n.n), lat_m.cube(0, (0,) * lat_m.n))], M_n, M_m)


@dataclass(frozen=True)
class OmegaPlan:
    count: int = 50
    rect_count: int = 4
    min_level: int = 0
    max_level: Optional[int] = None
    seed: int = 0


def random_omega(lat_n, lat_m, M_n, M_m, rng, plan: OmegaPlan) -> OmegaSet:
    rects = []
    max_n = lat_n.L if plan.max_level is None else plan.max_level
    max_m = lat_m.L if plan.max_level is None else plan.max_level
    for _ in range(plan.rect_count):
        l1 = int(rng.integers(plan.min_level, max_n + 1))
        l2 = int(rng.integers(plan.min_level, max_m + 1))
        i1 = tuple(int(v) for v in rng.integers(0, 1 << l1, lat_n.n))
        i2 = tuple(int(v) for v in rng.integers(0, 1 << l2, lat_m.n))
        rects.append((lat_n.cube(l1, i1), lat_m.cube(l2, i2)))
    return make_omega(rects, M_n, M_m)


def _contained_pair_mask(table: CarlesonTable, omega: OmegaSet) -> np.ndarray:
    """Boolean (num_cubes_n, num_cubes_m): is I x J inside Omega (cell-wise)?"""
    cn = _cube_cell_matrix(table.lat_n)
    cm = _cube_cell_matrix(table.lat_m)
    inside = cn @ (~omega.mask).astype(float) @ cm.T  # count of uncovered cell pairs
    return inside == 0


def biparameter_carleson_check(
    table: CarlesonTable,
    M_n: FactorMeasure,
    M_m: FactorMeasure,
    plan: OmegaPlan,
    constant: float = np.inf,
    extra_omegas=(),
) -> VerificationReport:
    """max over Omega of sum_{I x J subset Omega} C_IJ / mu(Omega).

    Omegas are random unions of dyadic rectangles (every point is covered by
    a member rectangle, so they are admissible); zero-mass Omegas are
    skipped and counted.
    """
    rng = np.random.default_rng(plan.seed)
    worst = 0.0
    witness = None
    skipped = 0
    omegas = list(extra_omegas)
    omegas += [random_omega(table.lat_n, table.lat_m, M_n, M_m, rng, plan) for _ in range(plan.count)]

    def one_ratio(om):
        if om.mass == 0.0:
            return None
        pairs = _contained_pair_mask(table, om)
        return float(table.values[pairs].sum()) / om.mass

    ratios = ordered_map(one_ratio, omegas)
    for k, (om, ratio) in enumerate(zip(omegas, ratios)):
        if ratio is None:
            skipped += 1
            continue
        if ratio > worst:
            worst = ratio
            witness = {
                "omega_index": k,
                "rectangles": [
                    {"levels": (I.level, J.level), "indices": (list(I.index), list(J.index))}
                    for I, J in om.rectangles
                ],
                "mass": om.mass,
            }
    return VerificationReport(
        check="biparameter_carleson",
        passed=bool(worst <= constant),
        value=worst,
        threshold=constant,
        witness=witness,
        samples=len(omegas),
        skipped=skipped,
    )


# ---------------------------------------------------------------------------
# dyadic Carleson embedding (one factor)


def subtree_sums(lat: ShiftedLattice, a: np.ndarray) -> np.ndarray:
    """sum of a over each cube's subtree (itself and all descendants)."""
    cubes, index = cube_ids(lat)
    out = np.array(a, dtype=float)
    for level in range(lat.L - 1, -1, -1):
        for c in lat.cubes(level):
            i = index[(c.level, c.index)]
            for ch in c.children():
                out[i] += out[index[(ch.level, ch.index)]]
    return out


def carleson_embedding_check(lat: ShiftedLattice, a: np.ndarray, nu: FactorMeasure, f) -> VerificationReport:
    """Packing validation then sum_Q a_Q |<f>_Q^nu|^2 <= 4 ||f||^2_{L2(nu)}.

    On packing violations the embedding is not asserted; the offending
    cubes are listed in the report details.
    """
    cubes, index = cube_ids(lat)
    a = np.asarray(a, dtype=float)
    if a.shape != (len(cubes),):
        raise CarlesonError(f"a has shape {a.shape}, expected ({len(cubes)},)")
    if np.any(a < 0):
        raise CarlesonError("Carleson sequence must be non-negative")
    masses = np.array([c.mass(nu) for c in cubes])
    sub = subtree_sums(lat, a)
    viol = [i for i in range(len(cubes)) if sub[i] > masses[i] * (1 + 1e-12) + 1e-15]
    fv = np.asarray(f).ravel()
    num = 0.0
    zero_skipped = 0
    for i, c in enumerate(cubes):
        if masses[i] == 0.0:
            zero_skipped += 1
            continue
        cells = c.cell_indices()
        avg = (fv[cells] * nu.weights[cells]).sum() / masses[i]
        num += a[i] * abs(avg) ** 2
    fn = float((np.abs(fv) ** 2 * nu.weights).sum())
    ratio = num / fn if fn > 0 else 0.0
    passed = (not viol) and ratio <= 4.0
    return VerificationReport(
        check="carleson_embedding",
        passed=bool(passed),
        value=ratio,
        threshold=4.0,
        witness=None if not viol else {"packing_violations": viol[:10]},
        samples=len(cubes),
        skipped=zero_skipped,
        details={"packing_ok": not viol, "embedding_sum": num, "f_norm_sq": fn},
    )


def greedy_carleson_sequence(lat: ShiftedLattice, nu: FactorMeasure, rng, saturate_prob: float = 0.5) -> np.ndarray:
    """Random a with the packing condition, saturating it often (top-down fill).

    The capacity of a cube is the live minimum over its weak ancestors of
    nu(A) minus what their subtrees already hold.
    """
    cubes, index = cube_ids(lat)
    a = np.zeros(len(cubes))
    used = np.zeros(len(cubes))  # allocated within each cube's subtree

    def ancestors(c: Cube):
        anc = c
        while True:
            yield anc
            if anc.level == 0:
                return
            anc = anc.ancestor(1)

    for level in range(lat.L + 1):
        for c in lat.cubes(level):
            i = index[(c.level, c.index)]
            room = min(anc.mass(nu) - used[index[(anc.level, anc.index)]] for anc in ancestors(c))
            if room <= 0:
                continue
            u = 1.0 if rng.random() < saturate_prob else float(rng.random())
            a[i] = u * room
            for anc in ancestors(c):
                used[index[(anc.level, anc.index)]] += a[i]
    return a


# ---------------------------------------------------------------------------
# Schur scale-and-distance coefficients


def cube_set_dist(I1: Cube, I2: Cube) -> float:
    """Periodic ell-infinity set distance between cubes (0 when they meet)."""
    lat = I1.lattice
    N = 1 << lat.L
    gaps = [
        arc_gap_cells(I1.start_cells[a], I1.width_cells, I2.start_cells[a], I2.width_cells, N)
        for a in range(lat.n)
    ]
    return max(gaps) / N


@dataclass(frozen=True)
class SchurMatrix:
    lattice: ShiftedLattice
    alpha: float
    values: np.ndarray  # (num_cubes, num_cubes), symmetric non-negative


def schur_matrix(alpha: float, lam: DominatingFunction, M: FactorMeasure, lat: ShiftedLattice) -> SchurMatrix:
    """A_{I1 I2} = l1^(a/2) l2^(a/2) mu(I1)^(1/2) mu(I2)^(1/2)
    / (D^a sup_{z in I1 u I2} lam(z, D)), D = l1 + l2 + d(I1, I2)."""
    cubes, _ = cube_ids(lat)
    centers = M.cell_centers()
    nc = len(cubes)
    A = np.zeros((nc, nc))
    masses = np.array([c.mass(M) for c in cubes])
    for i, I1 in enumerate(cubes):
        cells1 = I1.cell_indices()
        for j in range(i, nc):
            I2 = cubes[j]
            D = I1.side + I2.side + cube_set_dist(I1, I2)
            cells = np.union1d(cells1, I2.cell_indices())
            sup_lam = float(np.max(lam.eval(centers[cells], D)))
            A[i, j] = A[j, i] = (
                I1.side ** (alpha / 2)
                * I2.side ** (alpha / 2)
                * math.sqrt(masses[i] * masses[j])
                / (D ** alpha * sup_lam)
            )
    return SchurMatrix(lattice=lat, alpha=alpha, values=A)


def schur_check(alpha, lam, M, lat, x, y) -> VerificationReport:
    """(sum A x y)^2 / (sum x^2 sum y^2) for non-negative vectors x, y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise CarlesonError("schur_check requires non-negative x, y")
    A = schur_matrix(alpha, lam, M, lat).values
    sx = float(np.dot(x, x))
    sy = float(np.dot(y, y))
    val = float(x @ A @ y)
    ratio = val * val / (sx * sy) if sx > 0 and sy > 0 else 0.0
    return VerificationReport(
        check="schur_ratio",
        passed=True,
        value=ratio,
        threshold=None,
        witness=None,
        samples=A.shape[0] ** 2,
        details={"bilinear_value": val},
    )


def schur_maximize(A: np.ndarray, iters: int = 200) -> float:
    """sup over non-negative x,y of the Schur ratio, by alternating ascent.

    For entrywise non-negative A this converges to the squared top singular
    value (Perron alignment); used to calibrate the frozen constant C_S.
    """
    rng = np.random.default_rng(0)
    x = np.abs(rng.normal(size=A.shape[0])) + 1e-3
    y = np.abs(rng.normal(size=A.shape[1])) + 1e-3
    for _ in range(iters):
        x = A @ y
        nx = np.linalg.norm(x)
        if nx == 0:
            return 0.0
        x /= nx
        y = A.T @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        y /= ny
    val = float(x @ A @ y)
    return val * val / float((x @ x) * (y @ y))


# ---------------------------------------------------------------------------
# lemma diagnostics


@dataclass(frozen=True)
class DiagnosticsReport:
    mode: str
    ratios: list  # LHS / RHS per index (or per case)
    calibration: float  # ratio at the smallest index / first case
    details: dict = field(default_factory=dict)

    def to_dict(self):
        from .reports import _clean

        return _clean(
            {"mode": self.mode, "ratios": self.ratios, "calibration": self.calibration, "details": self.details}
        )


def _tail_integrand_max(lam, expo, M: FactorMeasure, x_cells, t_nodes, y_cells, numerator):
    """max over (x, t) of sum_y numerator(t, |x-y|) / denom * mu(y)."""
    centers = M.cell_centers()
    X = centers[x_cells]
    Y = centers[y_cells]
    worst = 0.0
    for t in t_nodes:
        den = size_denominator(lam, expo, float(t), X, Y)
        num = numerator(float(t), X, Y)
        vals = (num / den) @ M.weights[y_cells]
        worst = max(worst, float(np.max(vals)))
    return worst


def diag_F_alpha(I1: Cube, I2: Cube, lam: DominatingFunction, alpha: float, M: FactorMeasure, G: int = 4):
    """Near-field moment integral of I1 against the scale/distance bound
    A_{I1 I2} mu(I1)^(-1/2) mu(I2)^(-1/2) (maximized over x in I2 and the
    Whitney nodes of I2)."""
    if not I1.side < I2.side:
        raise CarlesonError("diag_F_alpha needs ell(I1) < ell(I2)")
    from .torus import point_dist

    centers = M.cell_centers()
    y_cells = I1.cell_indices()
    x_cells = I2.cell_indices()
    nodes, _ = level_whitney_nodes(I2.level, G)
    c1 = I1.center

    def numerator(t, X, Y):
        d = point_dist(Y, np.broadcast_to(c1, Y.shape))
        return np.broadcast_to(d ** alpha, (X.shape[0], Y.shape[0]))

    lhs = _tail_integrand_max(lam, alpha, M, x_cells, nodes, y_cells, numerator)
    D = I1.side + I2.side + cube_set_dist(I1, I2)
    cells = np.union1d(y_cells, x_cells)
    sup_lam = float(np.max(lam.eval(centers[cells], D)))
    rhs = I1.side ** (alpha / 2) * I2.side ** (alpha / 2) / (D ** alpha * sup_lam)
    return lhs, rhs


def diag_decay(
    I: Cube, kmax: int, lam: DominatingFunction, expo: float, M: FactorMeasure, G: int = 4, rate: Optional[float] = None
) -> DiagnosticsReport:
    """Geometric-decay diagnostics for the complement integrals.

    The k-th quantity integrates t^expo / denominator over the complement of
    I^(k-1) and is compared against 2^(-rate k); rate defaults to expo/2
    (the F_k bound), while the second-factor analogue uses rate = expo.
    Rejects bad cubes; ratios are max over x in I and t in the Whitney nodes
    of I. Indices with an empty complement (I^(k-1) = torus) are reported as
    zero.
    """
    if rate is None:
        rate = expo / 2.0
    lat = I.lattice
    if not lat.is_good(I):
        raise CarlesonError(f"diag_decay requires a good cube; {I} is bad")
    if kmax > I.level + 1:  # only I^(k-1) enters the integral
        raise CarlesonError(f"kmax={kmax} exceeds ancestry of level-{I.level} cube")
    x_cells = I.cell_indices()
    nodes, _ = level_whitney_nodes(I.level, G)
    ratios = []
    lhss = []
    for k in range(1, kmax + 1):
        anc = I.ancestor(k - 1)
        inside = np.zeros(M.num_cells, dtype=bool)
        inside[anc.cell_indices()] = True
        y_cells = np.nonzero(~inside)[0]
        if y_cells.size == 0:
            lhss.append(0.0)
            ratios.append(0.0)
            continue

        def numerator(t, X, Y):
            return np.full((X.shape[0], Y.shape[0]), t ** expo)

        lhs = _tail_integrand_max(lam, expo, M, x_cells, nodes, y_cells, numerator)
        lhss.append(lhs)
        ratios.append(lhs / 2.0 ** (-rate * k))
    return DiagnosticsReport(
        mode="decay",
        ratios=ratios,
        calibration=ratios[0] if ratios else float("nan"),
        details={"lhs": lhss, "level": I.level, "expo": expo, "rate": rate},
    )


def diag_a_sequence(
    K: KernelSpec,
    b_box,
    g_other,
    M_box: FactorMeasure,
    M_other: FactorMeasure,
    lat_box: ShiftedLattice,
    box_factor: int,
    other_eval_cells,
    other_nodes,
    rhs_per_cube,
    G: int = 4,
) -> DiagnosticsReport:
    """Shared engine for the a_I / a_J Carleson-sequence diagnostics.

    The tested function is (b_box on the box factor) x (g_other on the other
    factor); for tensor kernels Theta = u(x_box, t_box) v(x_other, t_other),
    so sum_{I' in I} a_{I'} = BoxEnergy_I * |v(x_other, t_other)|^2. The
    ratio against rhs_per_cube(I) is maximized over the exterior samples.
    """
    if not K.factorized:
        raise CarlesonError("a-sequence diagnostics need a factorized kernel")
    X_box = M_box.cell_centers()
    X_oth = M_other.cell_centers()
    fac_box = K.factor1 if box_factor == 1 else K.factor2
    fac_oth = K.factor2 if box_factor == 1 else K.factor1
    bw = np.asarray(b_box).ravel() * M_box.weights
    gw = np.asarray(g_other).ravel() * M_other.weights
    # per-cube Whitney energies of u, then box (subtree) sums
    cubes, index = cube_ids(lat_box)
    P = np.zeros(len(cubes))
    for level in range(lat_box.L + 1):
        nodes, wts = level_whitney_nodes(level, G)
        dens = np.zeros(M_box.num_cells)
        for t, w in zip(nodes, wts):
            u = fac_box(float(t), X_box, X_box) @ bw
            dens += w * M_box.weights * np.abs(u) ** 2
        for c in lat_box.cubes(level):
            P[index[(c.level, c.index)]] = dens[c.cell_indices()].sum()
    box_energy = subtree_sums(lat_box, P)
    # exterior factor values |v(x, t)|^2, maximized over the sample plan
    best_v = 0.0
    for t in other_nodes:
        v = fac_oth(float(t), X_oth[other_eval_cells], X_oth) @ gw
        best_v = max(best_v, float(np.max(np.abs(v) ** 2)))
    ratios = []
    for i, c in enumerate(cubes):
        rhs0 = rhs_per_cube(c)
        if rhs0 == 0.0:
            continue
        ratios.append(box_energy[i] * best_v / rhs0)
    worst_ratio = max(ratios) if ratios else 0.0
    return DiagnosticsReport(
        mode="a_sequence",
        ratios=[worst_ratio],
        calibration=worst_ratio,
        details={"per_cube_max": worst_ratio, "cubes": len(cubes)},
    )


def lemma_diagnostics(mode: str, **kw) -> DiagnosticsReport:
    """Dispatcher: F_alpha, Fk, Gi, aI, aJ (see the individual functions)."""
    if mode == "F_alpha":
        lhs, rhs = diag_F_alpha(kw["I1"], kw["I2"], kw["lam"], kw["alpha"], kw["M"], kw.get("G", 4))
        return DiagnosticsReport(mode=mode, ratios=[lhs / rhs], calibration=lhs / rhs, details={"lhs": lhs, "rhs": rhs})
    if mode == "Fk":
        return diag_decay(kw["I"], kw["kmax"], kw["lam"], kw["expo"], kw["M"], kw.get("G", 4), rate=kw["expo"] / 2.0)
    if mode == "Gi":
        return diag_decay(kw["I"], kw["kmax"], kw["lam"], kw["expo"], kw["M"], kw.get("G", 4), rate=kw["expo"])
    if mode in ("aI", "aJ"):
        return diag_a_sequence(
            kw["K"], kw["b_box"], kw["g_other"], kw["M_box"], kw["M_other"], kw["lat_box"],
            kw["box_factor"], kw["other_eval_cells"], kw["other_nodes"], kw["rhs_per_cube"], kw.get("G", 4),
        )
    raise CarlesonError(f"unknown diagnostics mode {mode!r}")


# ---------------------------------------------------------------------------
# dyadic strong maximal function


def strong_maximal(f, M_n: FactorMeasure, M_m: FactorMeasure, lat_n: ShiftedLattice, lat_m: ShiftedLattice) -> np.ndarray:
    """M_s f per product cell: max |<f>_{I x J}| over containing rectangles.

    Level-blocked dynamic programming: rectangle integrals per level pair
    come from cube aggregation; zero-mass rectangles are skipped.
    """
    F = np.asarray(f)
    out = np.zeros((M_n.num_cells, M_m.num_cells))
    Fw = F * M_n.weights[:, None] * M_m.weights[None, :]
    for j1 in range(lat_n.L + 1):
        cubes1 = lat_n.cubes(j1)
        agg1 = np.zeros((len(cubes1), M_n.num_cells))
        m1 = np.zeros(len(cubes1))
        for i, c in enumerate(cubes1):
            agg1[i, c.cell_indices()] = 1.0
            m1[i] = c.mass(M_n)
        for j2 in range(lat_m.L + 1):
            cubes2 = lat_m.cubes(j2)
            agg2 = np.zeros((len(cubes2), M_m.num_cells))
            m2 = np.zeros(len(cubes2))
            for i, c in enumerate(cubes2):
                agg2[i, c.cell_indices()] = 1.0
                m2[i] = c.mass(M_m)
            integ = agg1 @ Fw @ agg2.T
            mass = np.multiply.outer(m1, m2)
            with np.errstate(invalid="ignore", divide="ignore"):
                avg = np.where(mass > 0, np.abs(integ) / mass, 0.0)
            # scatter back: every cell of I x J sees this average
            cellavg = agg1.T @ avg @ agg2  # cells inherit their cube's value
            out = np.maximum(out, cellavg)
    return out


def sigma_car_car(f, table: CarlesonTable, M_n: FactorMeasure, M_m: FactorMeasure):
    """sum_{I,J} |<f>_{I x J}|^2 C_IJ plus the layer-cake index inclusion data.

    Returns (value, avgs, msf) where avgs is the per-pair |average| table and
    msf the strong maximal field; {|<f>_{IxJ}| > t} subset {M_s f > t} holds
    as index sets for every t by construction (assertable exactly).
    """
    lat_n, lat_m = table.lat_n, table.lat_m
    F = np.asarray(f)
    Fw = F * M_n.weights[:, None] * M_m.weights[None, :]
    cubes_n = lat_n.all_cubes()
    cubes_m = lat_m.all_cubes()
    an = _cube_cell_matrix(lat_n)
    am = _cube_cell_matrix(lat_m)
    mn = np.array([c.mass(M_n) for c in cubes_n])
    mm = np.array([c.mass(M_m) for c in cubes_m])
    integ = an @ Fw @ am.T
    mass = np.multiply.outer(mn, mm)
    with np.errstate(invalid="ignore", divide="ignore"):
        avgs = np.where(mass > 0, np.abs(integ) / mass, 0.0)
    value = float((avgs ** 2 * table.values).sum())
    msf = strong_maximal(F, M_n, M_m, lat_n, lat_m)
    return value, avgs, msf
