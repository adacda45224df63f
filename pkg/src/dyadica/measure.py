"""Discrete upper-doubling measures on the torus.

A factor measure lives on the 2^(L*n) finest dyadic cells of [0,1)^n and
carries exact integer prefix sums, so cube masses agree bit-for-bit with
correctly rounded direct summation. Dominating functions come in two
families: power laws lam(x,r) = c*r^d (doubling constant exactly 2^d) and
tabulated grids over (cell center, dyadic radius) with linear interpolation
in r. The symmetrization Lam(x,r) = inf_z lam(z, r + |x-z|) is realized as a
minimum over cell centers.

Pseudo-accretivity of a tensor factor b is checked as the minimum of
|integral of b over I| / mu(I) over all standard dyadic cubes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import torus
from .reports import VerificationReport

logger = logging.getLogger("dyadica")


class MeasureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact prefix sums


class _ExactPrefix:
    """Integer prefix sums of a float array over the (N,)*n cell grid.

    Each float weight is a dyadic rational; scaling by a common power of two
    turns the array into integers, whose prefix sums (and differences) are
    exact. Queries return the correctly rounded float of the exact sum,
    matching math.fsum of the covered cells bit-for-bit.
    """

    def __init__(self, weights: np.ndarray, n: int, ncells: int):
        self.n = n
        self.ncells = ncells
        ratios = [float(w).as_integer_ratio() for w in weights.ravel()]
        self.den = 1
        for _, d in ratios:
            if d > self.den:
                self.den = d
        ints = [num * (self.den // d) for num, d in ratios]
        if n == 1:
            acc = [0]
            for v in ints:
                acc.append(acc[-1] + v)
            self._p = acc
        elif n == 2:
            p = [[0] * (ncells + 1) for _ in range(ncells + 1)]
            for i in range(ncells):
                row = 0
                base = i * ncells
                for j in range(ncells):
                    row += ints[base + j]
                    p[i + 1][j + 1] = p[i][j + 1] + row
            self._p = p
        else:  # pragma: no cover - desk scale is n <= 2
            raise MeasureError(f"dimension {n} not supported (desk scale is 1 or 2)")

    def _block(self, lo, hi):
        """Exact integer sum over the axis-aligned block [lo, hi) (no wrap)."""
        if self.n == 1:
            return self._p[hi[0]] - self._p[lo[0]]
        p = self._p
        return p[hi[0]][hi[1]] - p[lo[0]][hi[1]] - p[hi[0]][lo[1]] + p[lo[0]][lo[1]]

    def box_sum(self, starts, widths) -> float:
        """Mass of the product of circular cell ranges, exactly rounded."""
        segs = []
        for s, w in zip(starts, widths):
            s %= self.ncells
            if w >= self.ncells:
                segs.append([(0, self.ncells)])
            elif s + w <= self.ncells:
                segs.append([(s, s + w)])
            else:
                segs.append([(s, self.ncells), (0, s + w - self.ncells)])
        total = 0
        if self.n == 1:
            for a, b in segs[0]:
                total += self._block((a,), (b,))
        else:
            for a1, b1 in segs[0]:
                for a2, b2 in segs[1]:
                    total += self._block((a1, a2), (b1, b2))
        return float(Fraction(total, self.den))


# ---------------------------------------------------------------------------
# factor measures


@dataclass(frozen=True)
class FactorMeasure:
    """Non-negative cell weights on the depth-L dyadic partition of [0,1)^n."""

    n: int
    L: int
    weights: np.ndarray  # flat, C-order over axes, length 2^(L*n)
    _prefix: _ExactPrefix = field(repr=False)

    @property
    def ncells_axis(self) -> int:
        return 1 << self.L

    @property
    def num_cells(self) -> int:
        return 1 << (self.L * self.n)

    @property
    def total_mass(self) -> float:
        return self._prefix.box_sum((0,) * self.n, (self.ncells_axis,) * self.n)

    def cell_centers(self) -> np.ndarray:
        """(num_cells, n) array of cell centers, C-order."""
        N = self.ncells_axis
        axis = (np.arange(N) + 0.5) / N
        if self.n == 1:
            return axis[:, None]
        g = np.meshgrid(*([axis] * self.n), indexing="ij")
        return np.stack([a.ravel() for a in g], axis=-1)

    def box_mass(self, starts, widths) -> float:
        """Mass of a product of circular cell ranges (starts/widths in cells)."""
        return self._prefix.box_sum(tuple(starts), tuple(widths))

    def grid(self) -> np.ndarray:
        """Weights reshaped to the (N,)*n cell grid."""
        return self.weights.reshape((self.ncells_axis,) * self.n)


def build_factor_measure(n: int, L: int, weights) -> FactorMeasure:
    """Validate weights and build the measure with exact prefix sums."""
    if n not in (1, 2):
        raise MeasureError(f"dimension n={n} not supported (desk scale is 1 or 2)")
    if L < 1:
        raise MeasureError(f"depth L={L} must be >= 1")
    w = np.asarray(weights, dtype=float).ravel()
    expected = 1 << (L * n)
    if w.size != expected:
        raise MeasureError(f"expected {expected} weights for n={n}, L={L}, got {w.size}")
    neg = np.nonzero(w < 0)[0]
    if neg.size:
        raise MeasureError(f"negative weight at cell index {int(neg[0])}: {w[neg[0]]}")
    if not np.any(w > 0):
        raise MeasureError("zero total mass")
    w = w.copy()
    w.setflags(write=False)
    return FactorMeasure(n=n, L=L, weights=w, _prefix=_ExactPrefix(w, n, 1 << L))


def ball_mass(M: FactorMeasure, x, r: float) -> float:
    """Mass of the periodic ell-infinity ball B(x, r), partial cells prorated.

    Cells carry their weight as a uniform density, so the result is
    continuous in r. Requires 0 < r <= 1/2 (torus diameter bound).
    """
    if not (0.0 < r <= 0.5):
        raise MeasureError(f"ball radius r={r} outside (0, 1/2]")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != M.n:
        raise MeasureError(f"point has {x.size} coordinates, measure has n={M.n}")
    N = M.ncells_axis
    edges = np.arange(N + 1) / N
    fracs = []
    for xi in x:
        a = (xi - r) % 1.0
        length = 2.0 * r
        cover = np.zeros(N)
        # the arc [a, a + 2r] split at the wrap point
        for s, e in ((a, min(a + length, 1.0)), (0.0, a + length - 1.0)):
            if e <= s:
                continue
            lo = np.maximum(edges[:-1], s)
            hi = np.minimum(edges[1:], e)
            cover += np.maximum(hi - lo, 0.0)
        fracs.append(cover * N)  # overlap fraction of each cell
    W = M.grid()
    if M.n == 1:
        return float(W @ fracs[0])
    return float(np.einsum("ij,i,j->", W, fracs[0], fracs[1]))


# ---------------------------------------------------------------------------
# dominating functions


@dataclass(frozen=True)
class DominatingFunction:
    """Majorant lam(x, r): non-decreasing in r, doubling with constant C_lam.

    family "power_law": lam(x,r) = c * r^d, with C_lam = 2^d exactly
    (x plays no role). family "tabulated": values[cell, radius] on the
    dyadic radius grid, evaluated with linear interpolation in r (clamped
    outside the grid) and cell snapping in x.
    """

    family: str
    c_lambda: float
    n: int = 1
    L: int = 0
    exponent: float = 0.0  # power_law: d
    scale: float = 1.0  # power_law: c
    radii: Optional[np.ndarray] = None  # tabulated
    values: Optional[np.ndarray] = None  # tabulated: (num_cells, num_radii)

    @property
    def d_lambda(self) -> float:
        return math.log2(self.c_lambda)

    def eval(self, points: np.ndarray, radii) -> np.ndarray:
        """lam at a batch of points (B, n) and radii broadcastable to (B,)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:  # a single point
            points = points[None, :]
        B = points.shape[0]
        r = np.broadcast_to(np.asarray(radii, dtype=float), (B,))
        if self.family == "power_law":
            return self.scale * r ** self.exponent
        N = 1 << self.L
        idx = np.minimum((points * N).astype(int), N - 1)
        cell = idx[:, 0] if self.n == 1 else idx[:, 0] * N + idx[:, 1]
        rows = self.values[cell]  # (B, R)
        grid = self.radii
        j = np.clip(np.searchsorted(grid, r, side="right") - 1, 0, grid.size - 2)
        r_cl = np.clip(r, grid[0], grid[-1])
        t = (r_cl - grid[j]) / (grid[j + 1] - grid[j])
        return rows[np.arange(B), j] * (1 - t) + rows[np.arange(B), j + 1] * t

    def at(self, x, r: float) -> float:
        """lam at a single point."""
        return float(self.eval(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1), r)[0])


def power_law_dominating(c: float, d: float) -> DominatingFunction:
    if c <= 0 or d <= 0:
        raise MeasureError("power law needs c > 0 and d > 0")
    return DominatingFunction(family="power_law", c_lambda=2.0 ** d, exponent=d, scale=c)


def dyadic_radii(L: int) -> np.ndarray:
    """Radius grid 2^-L, ..., 1/2, 1 (the last point serves lam(x, 2r) at r = 1/2)."""
    return 2.0 ** np.arange(-L, 1)


def tabulate_dominating(func, M: FactorMeasure, c_lambda: float) -> DominatingFunction:
    """Tabulate a callable lam(x, r) on M's cell centers and dyadic radii."""
    radii = dyadic_radii(M.L)
    centers = M.cell_centers()
    vals = np.empty((M.num_cells, radii.size))
    for j, r in enumerate(radii):
        for i in range(M.num_cells):
            vals[i, j] = func(centers[i], r)
    if np.any(vals <= 0):
        raise MeasureError("dominating function must be positive")
    if np.any(np.diff(vals, axis=1) < 0):
        raise MeasureError("dominating function must be non-decreasing in r")
    return DominatingFunction(
        family="tabulated", c_lambda=c_lambda, n=M.n, L=M.L, radii=radii, values=vals
    )


def verify_upper_doubling(M: FactorMeasure, lam: DominatingFunction, pass_tol: float = 1e-9) -> VerificationReport:
    """Scan mu(B(x,r)) <= lam(x,r) over cell centers x and dyadic radii.

    Reports the worst mass/lam ratio (pass iff <= 1, up to pass_tol), the
    measured doubling ratio max lam(x,2r)/lam(x,r) with its log2 as the
    empirical d_lambda, and the minimal rescale factor on failure.
    """
    centers = M.cell_centers()
    radii = dyadic_radii(M.L)[:-1]  # 2^-L .. 1/2
    worst = -np.inf
    witness = None
    worst_doubling = 0.0
    for r in radii:
        lam_r = lam.eval(centers, float(r))
        lam_2r = lam.eval(centers, float(2 * r))
        worst_doubling = max(worst_doubling, float(np.max(lam_2r / lam_r)))
        for i in range(M.num_cells):
            ratio = ball_mass(M, centers[i], float(r)) / lam_r[i]
            if ratio > worst:
                worst, witness = float(ratio), {"x": centers[i].tolist(), "r": float(r)}
    passed = worst <= 1.0 + pass_tol
    details = {
        "empirical_C_lambda": worst_doubling,
        "empirical_d_lambda": math.log2(worst_doubling) if worst_doubling > 0 else float("-inf"),
        "declared_C_lambda": lam.c_lambda,
    }
    if not passed:
        details["minimal_rescale"] = worst
    return VerificationReport(
        check="upper_doubling",
        passed=passed,
        value=worst,
        threshold=1.0,
        witness=witness,
        samples=M.num_cells * radii.size,
        details=details,
    )


def symmetrize_dominating(lam: DominatingFunction, M: FactorMeasure):
    """Build Lam(x,r) = min_z lam(z, r + |x-z|) over cell centers z.

    Returns (Lam, report). The report checks, at every tabulated point:
    Lam <= lam, r -> Lam(x,r) non-decreasing, and Lam(x,r) <= C_lam * Lam(y,r)
    whenever |x-y| <= r (periodic ell-infinity).
    """
    radii = dyadic_radii(M.L)
    centers = M.cell_centers()
    nc = M.num_cells
    dmat = np.empty((nc, nc))
    for i in range(nc):
        dmat[i] = torus.point_dist(centers[i][None, :], centers)
    vals = np.empty((nc, radii.size))
    for j, r in enumerate(radii):
        for i in range(nc):
            vals[i, j] = np.min(lam.eval(centers, r + dmat[i]))
    sym = DominatingFunction(
        family="tabulated", c_lambda=lam.c_lambda, n=M.n, L=M.L, radii=radii, values=vals
    )
    tol = 1e-12
    lam_at = np.empty_like(vals)
    for j, r in enumerate(radii):
        lam_at[:, j] = lam.eval(centers, float(r))
    dominated = bool(np.all(vals <= lam_at * (1 + tol)))
    monotone = bool(np.all(np.diff(vals, axis=1) >= -tol * np.abs(vals[:, :-1])))
    sym_ok = True
    sym_worst = 0.0
    for j, r in enumerate(radii):
        close = dmat <= r + tol
        ratio = vals[:, j][:, None] / vals[:, j][None, :]
        m = float(np.max(ratio[close]))
        sym_worst = max(sym_worst, m / lam.c_lambda)
        if m > lam.c_lambda * (1 + 1e-9):
            sym_ok = False
    passed = dominated and monotone and sym_ok
    report = VerificationReport(
        check="symmetrize_dominating",
        passed=passed,
        value=sym_worst,
        threshold=1.0,
        witness=None,
        samples=nc * radii.size,
        details={"dominated": dominated, "monotone_in_r": monotone, "quasi_symmetric": sym_ok},
    )
    return sym, report


# ---------------------------------------------------------------------------
# accretive functions


@dataclass(frozen=True)
class AccretiveFunction:
    """Per-cell values of a factor b, with its measured accretivity constant."""

    values: np.ndarray
    sup_norm: float
    accretivity_constant: float


def level_cube_sums(arr: np.ndarray, n: int, L: int, level: int) -> np.ndarray:
    """Sums of a flat per-cell array over the standard dyadic cubes of one level."""
    N = 1 << L
    s = 1 << (L - level)
    g = arr.reshape((N,) * n)
    if n == 1:
        return g.reshape(1 << level, s).sum(axis=1)
    return g.reshape(1 << level, s, 1 << level, s).sum(axis=(1, 3)).ravel()


def verify_pseudo_accretive(b_values, M: FactorMeasure, threshold: float = 0.0) -> VerificationReport:
    """min over all standard dyadic cubes (levels 0..L) of |avg_I b|.

    Cube integrals come from level-blocked sums of b * weights. Cubes with
    mu(I) = 0 are skipped and counted. Passes iff the minimum exceeds
    `threshold`.
    """
    b = np.asarray(b_values).ravel()
    if b.size != M.num_cells:
        raise MeasureError(f"b has {b.size} values, measure has {M.num_cells} cells")
    bw = b * M.weights
    best = np.inf
    witness = None
    skipped = 0
    total = 0
    for level in range(M.L + 1):
        integ = level_cube_sums(bw, M.n, M.L, level)
        mass = level_cube_sums(M.weights, M.n, M.L, level)
        total += mass.size
        zero = mass == 0
        skipped += int(zero.sum())
        live = ~zero
        if not live.any():
            continue
        ratios = np.abs(integ[live]) / mass[live]
        k = int(np.argmin(ratios))
        if ratios[k] < best:
            best = float(ratios[k])
            witness = {"level": level, "index": int(np.nonzero(live)[0][k])}
    return VerificationReport(
        check="pseudo_accretive",
        passed=bool(best > threshold),
        value=best,
        threshold=threshold,
        witness=witness,
        samples=total,
        skipped=skipped,
    )


def make_accretive(b_values, M: FactorMeasure, threshold: float = 0.0) -> AccretiveFunction:
    """Validate b and package it with its measured accretivity constant."""
    b = np.asarray(b_values).ravel()
    rep = verify_pseudo_accretive(b, M, threshold)
    if not rep.passed:
        raise MeasureError(
            f"b is not pseudo-accretive: min dyadic average {rep.value} <= {threshold} at {rep.witness}"
        )
    b = b.copy()
    b.setflags(write=False)
    return AccretiveFunction(values=b, sup_norm=float(np.max(np.abs(b))), accretivity_constant=rep.value)


# ---------------------------------------------------------------------------
# presets and CSV interface


def preset_measure(name: str, n: int, L: int, seed: Optional[int] = None) -> FactorMeasure:
    cells = 1 << (L * n)
    if name == "uniform":
        return build_factor_measure(n, L, np.full(cells, 1.0 / cells))
    if name == "two-cell":
        w = np.zeros(cells)
        w[0], w[1] = 0.75, 0.25
        return build_factor_measure(n, L, w)
    if name == "random-dirichlet":
        rng = np.random.default_rng(seed)
        return build_factor_measure(n, L, rng.dirichlet(np.ones(cells)))
    raise MeasureError(f"unknown measure preset {name!r}")


def preset_b(name: str, M: FactorMeasure, seed: Optional[int] = None, strength: float = 0.5):
    """Per-cell b values for the named preset."""
    if name == "one":
        return np.ones(M.num_cells)
    if name == "random-accretive":
        if not (0 <= strength <= 0.5):
            raise MeasureError("random-accretive strength must lie in [0, 1/2]")
        rng = np.random.default_rng(seed)
        return 1.0 + strength * rng.uniform(-1.0, 1.0, M.num_cells)
    raise MeasureError(f"unknown b preset {name!r}")


def save_weights_csv(path, values, n: int, L: int) -> None:
    vals = np.asarray(values).ravel()
    with open(path, "w") as fh:
        fh.write(f"# n={n} L={L}\n")
        for v in vals:
            if np.iscomplexobj(vals):
                sign = "+" if v.imag >= 0 else "-"
                fh.write(f"{float(v.real)!r}{sign}{abs(float(v.imag))!r}j\n")
            else:
                fh.write(f"{float(v)!r}\n")


def load_weights_csv(path):
    """Read (n, L, values) from the one-weight-per-line format."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise MeasureError(f"{path}: missing '# n=<n> L=<L>' header")
        fields = dict(tok.split("=") for tok in header.lstrip("#").split())
        n, L = int(fields["n"]), int(fields["L"])
        raw = [line.strip() for line in fh if line.strip()]
    vals = np.array([complex(s) for s in raw])
    if np.all(vals.imag == 0):
        vals = vals.real
    if vals.size != 1 << (L * n):
        raise MeasureError(f"{path}: expected {1 << (L * n)} values, got {vals.size}")
    return n, L, vals
