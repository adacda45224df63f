"""b-adapted Haar systems on a shifted lattice factor.

For each cube the children are permuted so the tail masses satisfy
|b(I*_j)| >= [1-(j-1)2^-n] |b(I)| (exhaustive search, first valid
permutation in lexicographic child order), and the Haar function of split
index j is

    phi_{I,j} = sqrt(b(I_j) b(I*_{j+1}) / b(I*_j))
                * (1_{I_j}/b(I_j) - 1_{I*_{j+1}}/b(I*_{j+1})),

with b(E) the b-weighted mass of E. Square roots take the principal
branch; a system goes complex exactly when b is complex or some mass ratio
is negative. The finite bi-parameter expansion adds explicit scaling (top)
components in each factor, so reconstruction is an exact identity:

    f = <f, 1 x 1> u0 x v0  +  sum <f, 1 x psi> u0 x (b2 psi)
      + sum <f, phi x 1> (b1 phi) x v0  +  sum <f, phi x psi> (b1 phi) x (b2 psi),

where u0 = b1 / b1(torus) and v0 = b2 / b2(torus). Pairings are bilinear
(no conjugation), matching the synthesis-with-b convention.

Split indices whose normalization degenerates on a zero-mass set are
dropped with a logged warning (they carry no L2(mu) mass); degeneracy on a
positive-mass set raises, naming the cube and child.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lattice import Cube, ShiftedLattice
from .measure import FactorMeasure

logger = logging.getLogger("dyadica")


class HaarError(RuntimeError):
    def __init__(self, msg, cube: Optional[Cube] = None):
        super().__init__(msg if cube is None else f"{msg} (cube {cube})")
        self.cube = cube


def cube_b_integral(cube: Cube, b_values: np.ndarray, M: FactorMeasure):
    """b(E) = integral of b over the cube, as a cell sum."""
    cells = cube.cell_indices()
    return (np.asarray(b_values).ravel()[cells] * M.weights[cells]).sum()


@dataclass(frozen=True)
class ChildOrdering:
    """Accretive child ordering of one cube.

    children[k] is I_{k+1}; tail_masses[k] = b(I*_{k+1}) for the union of
    children k..end; bounds[k] is the required lower bound on |tail_masses[k]|.
    """

    cube: Cube
    children: tuple
    tail_masses: tuple
    bounds: tuple


def order_children(M: FactorMeasure, b_values, cube: Cube, rel_tol: float = 1e-12) -> ChildOrdering:
    """First permutation (lexicographic) satisfying the tail-mass inequality.

    The inequality is |b(I*_j)| >= [1-(j-1)2^-n] |b(I)|, checked with a
    relative slack for float ties; a valid ordering always exists when
    |b(I)| > 0 (greedy removal argument), so exhaustion means the cube's
    b-average degenerates.
    """
    kids = cube.children()
    m = len(kids)
    b_kids = [cube_b_integral(c, b_values, M) for c in kids]
    b_total = sum(b_kids)
    slack = abs(b_total)
    if slack == 0.0:
        raise HaarError("child ordering impossible: b integrates to zero over the cube", cube)
    frac = 2.0 ** (-cube.lattice.n)
    bounds = tuple((1.0 - j * frac) * slack for j in range(m))  # j = 0 .. m-1 (1-based j-1)
    for perm in itertools.permutations(range(m)):
        tails = []
        acc = 0
        for p in reversed(perm):
            acc = acc + b_kids[p]
            tails.append(acc)
        tails.reverse()
        if all(abs(t) >= bd * (1.0 - rel_tol) for t, bd in zip(tails, bounds)):
            return ChildOrdering(
                cube=cube,
                children=tuple(kids[p] for p in perm),
                tail_masses=tuple(tails),
                bounds=bounds,
            )
    raise HaarError("no child ordering satisfies the accretive tail inequality", cube)


@dataclass(frozen=True)
class HaarFunction:
    """One b-adapted Haar function: constant on each child, zero outside."""

    cube: Cube
    j: int  # split index, 1-based, 1..2^n-1
    values: np.ndarray  # per finest cell, full torus
    normalization: complex


_DROP = object()  # sentinel: split index carries no L2(mu) mass


def _haar_from_ordering(M: FactorMeasure, ordering: ChildOrdering, j: int):
    """phi_{I,j} for a validated ordering, or _DROP for massless degeneracies."""
    cube = ordering.cube
    b_Ij = ordering.tail_masses[j - 1] - ordering.tail_masses[j]
    b_tail_next = ordering.tail_masses[j]
    b_tail = ordering.tail_masses[j - 1]
    child = ordering.children[j - 1]
    rest = ordering.children[j:]
    if b_Ij == 0:
        if child.mass(M) == 0:
            return _DROP
        raise HaarError(f"zero b-mass on positive-mass child {child} (split {j})", cube)
    if b_tail_next == 0:
        if all(c.mass(M) == 0 for c in rest):
            return _DROP
        raise HaarError(f"zero b-mass on positive-mass tail after split {j}", cube)
    if b_tail == 0:
        raise HaarError(f"zero b-mass on tail union at split {j}", cube)
    ratio = b_Ij * b_tail_next / b_tail
    complex_out = np.iscomplexobj(np.asarray(ordering.tail_masses)) or np.real(ratio) < 0
    norm = np.sqrt(complex(ratio)) if complex_out else np.sqrt(float(ratio))
    vals = np.zeros(M.num_cells, dtype=complex if complex_out else float)
    vals[child.cell_indices()] = norm / b_Ij
    for c in rest:
        vals[c.cell_indices()] = -norm / b_tail_next
    return HaarFunction(cube=cube, j=j, values=vals, normalization=norm)


def haar_function(M: FactorMeasure, b_values, cube: Cube, j: int) -> HaarFunction:
    """Order the children of `cube` and build phi_{cube, j}."""
    n = cube.lattice.n
    if not (1 <= j <= (1 << n) - 1):
        raise HaarError(f"split index {j} outside 1..{(1 << n) - 1}", cube)
    out = _haar_from_ordering(M, order_children(M, b_values, cube), j)
    if out is _DROP:
        raise HaarError(f"split index {j} is degenerate (massless) on this cube", cube)
    return out


# ---------------------------------------------------------------------------
# per-factor systems


@dataclass
class FactorHaarSystem:
    """All Haar functions of one factor plus its scaling (top) component.

    Row 0 of `analysis` is the constant 1 (top analysis direction); row 0 of
    `synthesis` is b / b(torus). Rows 1.. hold phi and b*phi respectively.
    """

    M: FactorMeasure
    lattice: ShiftedLattice
    b_values: np.ndarray
    analysis: np.ndarray  # (1+R, cells)
    synthesis: np.ndarray  # (1+R, cells)
    rows: list  # row metadata: None for top, else (cube, j)
    row_levels: np.ndarray  # -1 for top, else cube level
    dropped: list = field(default_factory=list)

    @property
    def num_rows(self) -> int:
        return self.analysis.shape[0]

    def analysis_weighted(self) -> np.ndarray:
        return self.analysis * self.M.weights[None, :]

    def haar_rows(self) -> np.ndarray:
        return np.arange(1, self.num_rows)

    def rows_for_cube(self, cube: Cube) -> list:
        return [i for i, meta in enumerate(self.rows) if meta is not None and meta[0] == cube]


def build_haar_system(M: FactorMeasure, b_values, lat: ShiftedLattice) -> FactorHaarSystem:
    """Construct orderings and Haar functions on every positive-mass cube.

    Cubes live at levels 0..L-1 (their children are resolvable); zero-mass
    cubes are skipped, massless degenerate split indices dropped with a
    warning.
    """
    b = np.asarray(b_values).ravel()
    if b.size != M.num_cells:
        raise HaarError(f"b has {b.size} values, measure has {M.num_cells} cells")
    b_total = (b * M.weights).sum()
    if b_total == 0:
        raise HaarError("b integrates to zero over the torus; no scaling component")
    funcs = []
    dropped = []
    for level in range(lat.L):
        for cube in lat.cubes(level):
            if cube.mass(M) == 0:
                dropped.append((cube, None, "zero-mass cube"))
                continue
            ordering = order_children(M, b, cube)
            for j in range(1, 1 << lat.n):
                out = _haar_from_ordering(M, ordering, j)
                if out is _DROP:
                    dropped.append((cube, j, "massless degenerate split"))
                    logger.warning("dropping degenerate Haar index %s on %s", j, cube)
                else:
                    funcs.append(out)
    complex_sys = np.iscomplexobj(b) or any(np.iscomplexobj(f.values) for f in funcs)
    dtype = complex if complex_sys else float
    R = len(funcs)
    analysis = np.zeros((R + 1, M.num_cells), dtype=dtype)
    synthesis = np.zeros((R + 1, M.num_cells), dtype=dtype)
    analysis[0] = 1.0
    synthesis[0] = b / b_total
    rows = [None]
    levels = [-1]
    for i, f in enumerate(funcs, start=1):
        analysis[i] = f.values
        synthesis[i] = b * f.values
        rows.append((f.cube, f.j))
        levels.append(f.cube.level)
    return FactorHaarSystem(
        M=M,
        lattice=lat,
        b_values=b,
        analysis=analysis,
        synthesis=synthesis,
        rows=rows,
        row_levels=np.asarray(levels),
        dropped=dropped,
    )


# ---------------------------------------------------------------------------
# bi-parameter transform


@dataclass(frozen=True)
class BiParamCoefficients:
    """Coefficient tensor <f, phi x psi> including the scaling blocks.

    matrix[0, 0] is the root x root component; row/column 0 are the
    root x Haar and Haar x root blocks; the rest is the Haar x Haar block.
    """

    matrix: np.ndarray
    system_n: FactorHaarSystem
    system_m: FactorHaarSystem

    @property
    def haar_block(self) -> np.ndarray:
        return self.matrix[1:, 1:]

    def to_csv(self, path) -> None:
        """Columns (level1,index1,childIdx1,level2,index2,childIdx2,re,im); tops use level -1."""

        def meta(sys, i):
            if sys.rows[i] is None:
                return (-1, 0, 0)
            cube, j = sys.rows[i]
            flat = 0
            for a, v in enumerate(cube.index):
                flat = flat * (1 << cube.level) + v
            return (cube.level, flat, j)

        with open(path, "w") as fh:
            fh.write("level1,index1,childIdx1,level2,index2,childIdx2,re,im\n")
            for i in range(self.matrix.shape[0]):
                l1, x1, j1 = meta(self.system_n, i)
                for k in range(self.matrix.shape[1]):
                    l2, x2, j2 = meta(self.system_m, k)
                    v = complex(self.matrix[i, k])
                    fh.write(f"{l1},{x1},{j1},{l2},{x2},{j2},{v.real!r},{v.imag!r}\n")


def forward_transform(f, sys_n: FactorHaarSystem, sys_m: FactorHaarSystem) -> BiParamCoefficients:
    """All pairings <f, phi x psi> (plain bilinear pairing, no b weight)."""
    F = np.asarray(f)
    if F.shape != (sys_n.M.num_cells, sys_m.M.num_cells):
        raise HaarError(f"f has shape {F.shape}, expected {(sys_n.M.num_cells, sys_m.M.num_cells)}")
    C = sys_n.analysis_weighted() @ F @ sys_m.analysis_weighted().T
    return BiParamCoefficients(matrix=C, system_n=sys_n, system_m=sys_m)


def reconstruct(coeffs: BiParamCoefficients) -> np.ndarray:
    """Synthesize f = sum coeff * (b1 phi) x (b2 psi) (tops included)."""
    return coeffs.system_n.synthesis.T @ coeffs.matrix @ coeffs.system_m.synthesis


def weighted_l2_sq(F, M_n: FactorMeasure, M_m: FactorMeasure) -> float:
    """Squared L2(mu) norm of a per-product-cell array."""
    F = np.asarray(F)
    return float(np.einsum("ij,i,j->", np.abs(F) ** 2, M_n.weights, M_m.weights).real)


# ---------------------------------------------------------------------------
# system diagnostics


def cancellation_worst(sys: FactorHaarSystem) -> float:
    """max over Haar rows of |int b phi dmu| / (sup|b| mu(I))."""
    worst = 0.0
    bw = sys.b_values * sys.M.weights
    sup = float(np.max(np.abs(sys.b_values)))
    for i in range(1, sys.num_rows):
        cube, _ = sys.rows[i]
        integral = abs(np.dot(bw, sys.analysis[i]))
        worst = max(worst, integral / (sup * cube.mass(sys.M)))
    return worst


def biorthogonality_deviation(sys: FactorHaarSystem) -> float:
    """max |<b phi_i, phi_k> - delta_ik| over Haar rows (tops included via row 0)."""
    G = sys.synthesis @ (sys.analysis * sys.M.weights[None, :]).T
    return float(np.max(np.abs(G - np.eye(sys.num_rows))))


def lp_norm_ratios(sys: FactorHaarSystem, p: float) -> np.ndarray:
    """||phi||_p / mu(I_j)^(1/p - 1/2) per Haar row (property-(3) envelope)."""
    out = []
    w = sys.M.weights
    for i in range(1, sys.num_rows):
        cube, j = sys.rows[i]
        ordering = order_children(sys.M, sys.b_values, cube)
        mass_child = ordering.children[j - 1].mass(sys.M)
        if mass_child == 0:
            continue
        v = np.abs(sys.analysis[i])
        if np.isinf(p):
            nrm = float(np.max(v[w > 0])) if np.any(w > 0) else 0.0
            out.append(nrm * mass_child ** 0.5)
        else:
            nrm = float((w @ v ** p) ** (1.0 / p))
            out.append(nrm / mass_child ** (1.0 / p - 0.5))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# xi decomposition (ancestor splitting)


def xi_decomposition(lat: ShiftedLattice, I: Cube, k: int, b_values, M: FactorMeasure, haar_index: int = 1):
    """xi_I^k and the average term of phi_{I^(k)} on I^(k-1).

    xi = -<phi>_{I^(k-1)} 1_{(I^(k-1))^c} + phi * 1_{I^(k) \\ I^(k-1)}, so
    that phi = xi + <phi>_{I^(k-1)} pointwise on the whole torus. Returns
    (xi values, average, report dict with the measured sup constant).
    """
    if k < 1:
        raise HaarError(f"k={k} must be >= 1", I)
    if k > I.level:
        raise HaarError(f"k={k} exceeds available ancestry of a level-{I.level} cube", I)
    I_k = I.ancestor(k)
    I_km1 = I.ancestor(k - 1)
    phi = haar_function(M, b_values, I_k, haar_index)
    km1_cells = I_km1.cell_indices()
    mass_km1 = I_km1.mass(M)
    if mass_km1 == 0:
        raise HaarError("I^(k-1) has zero mass; average undefined", I_km1)
    w = M.weights
    avg = (phi.values[km1_cells] * w[km1_cells]).sum() / mass_km1
    xi = np.full(M.num_cells, -avg, dtype=phi.values.dtype)
    k_cells = I_k.cell_indices()
    xi[k_cells] = phi.values[k_cells] - avg
    xi[km1_cells] = 0.0
    sup_constant = float(np.max(np.abs(xi))) * I_k.mass(M) ** 0.5
    report = {
        "sup_xi": float(np.max(np.abs(xi))),
        "sup_constant": sup_constant,  # sup|xi| * mu(I^(k))^(1/2)
        "mass_IK": I_k.mass(M),
    }
    return xi, avg, report
