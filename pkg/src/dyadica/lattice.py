"""Randomly shifted dyadic grids on the torus, good/bad cubes, pi_good.

The lattice at level j is the standard dyadic partition of [0,1)^n shifted
by sigma_j = sum_{i=j+1}^{L} 2^-i beta^i (mod 1). sigma_L = 0, every shift
is a multiple of the finest cell 2^-L, and each level-(j+1) cube sits in
exactly one level-j cube; all navigation is integer arithmetic in cells.

A cube I is bad when some cube J of the same lattice with
ell(J) >= 2^r ell(I) has dist(I, boundary of J) <= ell(I)^gamma ell(J)^(1-gamma)
(periodic ell-infinity set distance). The level-0 cube is the full torus and
carries no boundary, so only witness levels 1..level-r matter. Goodness of a
level-j cube is a function of the bit prefix beta^1..beta^j alone, while its
position depends only on the suffix; that independence is what makes the
averaging identity in gfunction exact, and it also lets pi_good enumerate
just the prefix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .torus import arc_gap_cells, arc_to_grid_dist_cells


class LatticeError(ValueError):
    pass


def gamma_from(alpha: float, d_lambda: float) -> float:
    """The goodness exponent gamma = alpha / (2 (d_lambda + alpha))."""
    if alpha <= 0:
        raise LatticeError(f"alpha={alpha} must be positive")
    if d_lambda < 0:
        raise LatticeError(f"d_lambda={d_lambda} must be non-negative")
    return alpha / (2.0 * (d_lambda + alpha))


def default_r(gamma: float) -> int:
    """Smallest integer r with 2^(-r*gamma) < 1/2 (guarantees pi_good > 0)."""
    return int(math.floor(1.0 / gamma)) + 1


@dataclass(frozen=True)
class ShiftBits:
    """Per-level shift bits beta^j in {0,1}^n for j = 1..L."""

    n: int
    L: int
    bits: tuple  # tuple of L tuples of n ints
    seed: Optional[int] = None

    def __post_init__(self):
        if len(self.bits) != self.L:
            raise LatticeError(f"need {self.L} bit vectors, got {len(self.bits)}")
        for b in self.bits:
            if len(b) != self.n or any(v not in (0, 1) for v in b):
                raise LatticeError(f"bad bit vector {b}")

    @classmethod
    def from_seed(cls, n: int, L: int, seed: int) -> "ShiftBits":
        rng = np.random.default_rng(seed)
        raw = rng.integers(0, 2, size=(L, n))
        return cls(n=n, L=L, bits=tuple(tuple(int(v) for v in row) for row in raw), seed=seed)

    @classmethod
    def from_index(cls, n: int, L: int, index: int) -> "ShiftBits":
        """Decode one of the 2^(L*n) configurations (for exact enumeration)."""
        bits = []
        for _ in range(L):
            row = []
            for _ in range(n):
                row.append(index & 1)
                index >>= 1
            bits.append(tuple(row))
        return cls(n=n, L=L, bits=tuple(bits))

    @classmethod
    def zero(cls, n: int, L: int) -> "ShiftBits":
        return cls(n=n, L=L, bits=tuple((0,) * n for _ in range(L)))


def shift_cells_table(bits: ShiftBits) -> np.ndarray:
    """(L+1, n) int table: sigma_j in cells = sum_{i>j} 2^(L-i) beta^i mod 2^L."""
    n, L = bits.n, bits.L
    N = 1 << L
    out = np.zeros((L + 1, n), dtype=np.int64)
    acc = np.zeros(n, dtype=np.int64)
    for i in range(L, 0, -1):  # levels L down to 1
        acc = (acc + (1 << (L - i)) * np.asarray(bits.bits[i - 1], dtype=np.int64)) % N
        out[i - 1] = acc
    return out


class Cube:
    """A cube of a shifted lattice: level j, per-axis index mod 2^j."""

    __slots__ = ("lattice", "level", "index")

    def __init__(self, lattice: "ShiftedLattice", level: int, index):
        if not (0 <= level <= lattice.L):
            raise LatticeError(f"level {level} outside 0..{lattice.L}")
        idx = tuple(int(i) % (1 << level) if level else 0 for i in np.atleast_1d(index))
        if len(idx) != lattice.n:
            raise LatticeError(f"index {index} has wrong dimension for n={lattice.n}")
        self.lattice = lattice
        self.level = level
        self.index = idx

    def __repr__(self):
        return f"Cube(level={self.level}, index={self.index})"

    def __eq__(self, other):
        return (
            isinstance(other, Cube)
            and self.lattice is other.lattice
            and self.level == other.level
            and self.index == other.index
        )

    def __hash__(self):
        return hash((id(self.lattice), self.level, self.index))

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def width_cells(self) -> int:
        return 1 << (self.lattice.L - self.level)

    @property
    def start_cells(self) -> tuple:
        N = 1 << self.lattice.L
        sh = self.lattice.shift_cells[self.level]
        w = self.width_cells
        return tuple(int((i * w + sh[a]) % N) for a, i in enumerate(self.index))

    @property
    def center(self) -> np.ndarray:
        N = 1 << self.lattice.L
        s = np.asarray(self.start_cells, dtype=float)
        return ((s + self.width_cells / 2.0) / N) % 1.0

    def axis_cells(self) -> list:
        """Per-axis arrays of covered cell indices (wrapping)."""
        N = 1 << self.lattice.L
        return [np.arange(s, s + self.width_cells) % N for s in self.start_cells]

    def cell_indices(self) -> np.ndarray:
        """Flat (C-order) indices of the finest cells covered by this cube."""
        ax = self.axis_cells()
        if self.lattice.n == 1:
            return ax[0]
        N = 1 << self.lattice.L
        return (ax[0][:, None] * N + ax[1][None, :]).ravel()

    def mass(self, M) -> float:
        return M.box_mass(self.start_cells, (self.width_cells,) * self.lattice.n)

    # -- navigation ---------------------------------------------------------

    def parent(self) -> "Cube":
        return self.ancestor(1)

    def ancestor(self, k: int) -> "Cube":
        """The unique cube with side 2^k * side containing this one."""
        if k < 0:
            raise LatticeError("ancestor order k must be >= 0")
        if k == 0:
            return self
        lvl = self.level - k
        if lvl < 0:
            raise LatticeError(f"ancestor({k}) of a level-{self.level} cube is above the root")
        lat = self.lattice
        N = 1 << lat.L
        w_anc = 1 << (lat.L - lvl)
        idx = tuple(
            ((s - lat.shift_cells[lvl][a]) % N) // w_anc for a, s in enumerate(self.start_cells)
        )
        anc = Cube(lat, lvl, idx)
        for a in range(lat.n):
            off = (self.start_cells[a] - anc.start_cells[a]) % N
            assert off + self.width_cells <= w_anc, "ancestor containment violated"
        return anc

    def children(self) -> list:
        if self.level >= self.lattice.L:
            raise LatticeError(f"cubes at level {self.level} have no children (L={self.lattice.L})")
        lat = self.lattice
        N = 1 << lat.L
        w_child = self.width_cells // 2
        out = []
        for offs in itertools.product((0, 1), repeat=lat.n):
            start = tuple((self.start_cells[a] + offs[a] * w_child) % N for a in range(lat.n))
            idx = tuple(((start[a] - lat.shift_cells[self.level + 1][a]) % N) // w_child for a in range(lat.n))
            out.append(Cube(lat, self.level + 1, idx))
        return out


def navigate(cube: Cube, direction: str, k: int = 1):
    """Spec-facing dispatcher: 'parent', 'children', or 'ancestor' with order k."""
    if direction == "parent":
        return cube.parent()
    if direction == "children":
        return cube.children()
    if direction == "ancestor":
        return cube.ancestor(k)
    raise LatticeError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# goodness


def _mesh_dist_threshold_scan(n, L, r, gamma, level, start_cells, width, shift_cells):
    """Return (is_good, witness_level). Scans witness levels 1..level-r.

    Distance from the cube to the level-jp face mesh is the min over axes of
    the arc-to-grid distance, exact in cell units.
    """
    N = 1 << L
    for jp in range(1, level - r + 1):
        spacing = 1 << (L - jp)
        d_cells = min(
            arc_to_grid_dist_cells(start_cells[a], width, spacing, int(shift_cells[jp][a]))
            for a in range(n)
        )
        threshold = 2.0 ** (-(level * gamma + jp * (1.0 - gamma)))
        if d_cells / N <= threshold:
            return False, jp
    return True, None


class ShiftedLattice:
    """Random dyadic lattice with goodness parameters (r, gamma).

    Immutable after construction; the goodness cache is populated once at
    build time (classification is pure).
    """

    def __init__(self, n: int, L: int, bits: ShiftBits, r: int, gamma: float):
        if L < 1:
            raise LatticeError(f"L={L} must be >= 1")
        if not (0.0 < gamma < 0.5):
            raise LatticeError(f"gamma={gamma} outside (0, 1/2)")
        if r < 1 or int(r) != r:
            raise LatticeError(f"r={r} must be a positive integer")
        if bits.n != n or bits.L != L:
            raise LatticeError("shift bits do not match lattice dimensions")
        self.n = n
        self.L = L
        self.bits = bits
        self.r = int(r)
        self.gamma = float(gamma)
        self.shift_cells = shift_cells_table(bits)
        self.shift_cells.setflags(write=False)
        self._good = {}
        for level in range(L + 1):
            for idx in itertools.product(range(1 << level), repeat=n):
                cb = Cube(self, level, idx)
                self._good[(level, idx)] = _mesh_dist_threshold_scan(
                    n, L, self.r, self.gamma, level, cb.start_cells, cb.width_cells, self.shift_cells
                )

    @property
    def seed(self):
        return self.bits.seed

    def cube(self, level: int, index) -> Cube:
        return Cube(self, level, index)

    def cubes(self, level: int) -> list:
        return [Cube(self, level, idx) for idx in itertools.product(range(1 << level), repeat=self.n)]

    def all_cubes(self) -> list:
        return [c for level in range(self.L + 1) for c in self.cubes(level)]

    def is_good(self, cube: Cube) -> bool:
        return self._good[(cube.level, cube.index)][0]

    def good_cell_mask(self, level: int) -> np.ndarray:
        """Boolean per finest cell: is the level-`level` cube containing it good?"""
        N = 1 << self.L
        shape = (N,) * self.n
        mask = np.zeros(shape, dtype=bool)
        for idx in itertools.product(range(1 << level), repeat=self.n):
            if self._good[(level, idx)][0]:
                cb = Cube(self, level, idx)
                ax = cb.axis_cells()
                if self.n == 1:
                    mask[ax[0]] = True
                else:
                    mask[np.ix_(ax[0], ax[1])] = True
        return mask.ravel()


def build_lattice(n: int, L: int, seed: int, r: int, gamma: float) -> ShiftedLattice:
    """Draw shift bits from `seed` and build the lattice."""
    return ShiftedLattice(n, L, ShiftBits.from_seed(n, L, seed), r, gamma)


def cube_boundary_dist(I: Cube, J: Cube) -> float:
    """Set distance dist(I, boundary of J), exact in cell units.

    Same-lattice cubes are nested or disjoint: inside, the distance is the
    smallest per-axis gap from I's faces to J's; disjoint, it equals
    dist(I, J) = max over axes of the per-axis arc gaps.
    """
    lat = I.lattice
    N = 1 << lat.L
    if J.level == 0:
        raise LatticeError("the level-0 torus cube has no boundary")
    si, wi = I.start_cells, I.width_cells
    sj, wj = J.start_cells, J.width_cells
    offs = [(si[a] - sj[a]) % N for a in range(lat.n)]
    inside = wi <= wj and all(o + wi <= wj for o in offs)
    if inside:
        d = min(min(o, wj - o - wi) for o in offs)
        return d / N
    gaps = [arc_gap_cells(si[a], wi, sj[a], wj, N) for a in range(lat.n)]
    return max(gaps) / N


def goodness_threshold(level_i: int, level_j: int, gamma: float) -> float:
    """ell(I)^gamma * ell(J)^(1-gamma) for cubes at the two levels."""
    return 2.0 ** (-(level_i * gamma + level_j * (1.0 - gamma)))


def classify_goodness(lattice: ShiftedLattice, cube: Cube):
    """(is_good, witness) from the build-time cache; witness is a bad-making J."""
    good, jp = lattice._good[(cube.level, cube.index)]
    if good:
        return True, None
    # materialize a concrete witness at the offending level
    best = None
    best_d = np.inf
    for J in lattice.cubes(jp):
        d = cube_boundary_dist(cube, J)
        if d < best_d:
            best, best_d = J, d
    return False, best


# ---------------------------------------------------------------------------
# pi_good


def goodness_from_bits(n: int, L: int, r: int, gamma: float, level: int, index, bits: ShiftBits) -> bool:
    """Goodness of one cube without building a full lattice (used by enumeration)."""
    sc = shift_cells_table(bits)
    N = 1 << L
    w = 1 << (L - level)
    idx = np.atleast_1d(index)
    start = tuple(int((int(idx[a]) * w + sc[level][a]) % N) for a in range(n))
    ok, _ = _mesh_dist_threshold_scan(n, L, r, gamma, level, start, w, sc)
    return ok


def pi_good(
    n: int,
    L: int,
    r: int,
    gamma: float,
    level: int,
    mode: str = "exact",
    trials: int = 10_000,
    seed: int = 0,
    index=None,
):
    """P(the level-`level` cube at a fixed position index is good) over shifts.

    exact: enumerates the goodness-relevant bit prefix beta^1..beta^level
    (2^(level*n) configurations, equivalent to enumerating all 2^(L*n) since
    goodness does not depend on the suffix). Guarded at L*n > 24.
    monte_carlo: averages over `trials` seeded draws; returns (estimate, se).
    """
    if not (0 <= level <= L):
        raise LatticeError(f"level {level} outside 0..{L}")
    if index is None:
        index = (0,) * n
    if mode == "exact":
        if L * n > 24:
            raise LatticeError(f"exact enumeration refused at L*n = {L * n} > 24")
        nbits = level * n
        good = 0
        for cfg in range(1 << nbits):
            bits = ShiftBits.from_index(n, level, cfg) if level else ShiftBits.zero(n, 0)
            # embed the prefix into a full-depth bit vector (suffix zeros)
            full = ShiftBits(n=n, L=L, bits=bits.bits + tuple((0,) * n for _ in range(L - level)))
            good += goodness_from_bits(n, L, r, gamma, level, index, full)
        return good / (1 << nbits), 0.0
    if mode == "monte_carlo":
        hits = 0
        for t in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
            raw = rng.integers(0, 2, size=(L, n))
            bits = ShiftBits(n=n, L=L, bits=tuple(tuple(int(v) for v in row) for row in raw))
            hits += goodness_from_bits(n, L, r, gamma, level, index, bits)
        p = hits / trials
        se = math.sqrt(p * (1 - p) / trials)
        return p, se
    raise LatticeError(f"unknown pi_good mode {mode!r}")


# ---------------------------------------------------------------------------
# Whitney quadrature


@dataclass(frozen=True)
class WhitneyNodes:
    """Log-uniform quadrature for the dt/t mass of (ell/2, ell]."""

    cube: Optional[Cube]
    nodes: np.ndarray
    weights: np.ndarray


def level_whitney_nodes(level: int, G: int):
    """Nodes/weights for the slab (2^-(level+1), 2^-level]; sum w = log 2."""
    if G < 1:
        raise LatticeError(f"G={G} must be >= 1")
    ell = 2.0 ** (-level)
    g = np.arange(1, G + 1)
    nodes = ell * 2.0 ** (-(g - 0.5) / G)
    weights = np.full(G, math.log(2.0) / G)
    return nodes, weights


def whitney_quadrature(cube: Cube, G: int) -> WhitneyNodes:
    nodes, weights = level_whitney_nodes(cube.level, G)
    return WhitneyNodes(cube=cube, nodes=nodes, weights=weights)
