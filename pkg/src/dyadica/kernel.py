"""Kernel families for Theta_{t1,t2} and the assumption verifiers.

A kernel is evaluated at cell centers; Theta f is then the exact weighted
cell sum, so the only discretization error anywhere is the t-quadrature.
Built-in kernels are tensor products K = K1(t1,x1,y1) K2(t2,x2,y2):

  standard_product  c * prod_i  t^e / (t^e lam(x,t) + |x-y|^e lam(x,|x-y|))
                    times a smooth mean-zero oscillation cos(2 pi k_t <y>)
                    per factor (k_t ~ 1/t), built to saturate the size
                    condition with ratio exactly c when the oscillation is
                    switched off.
  b_annihilating    w(x1,t1) w(x2,t2) g(y1) h(y2) with g, h root-level
                    adapted Haar functions, so that Theta b vanishes
                    identically (int g b1 dmu_n = 0).
  violator          K = 1 (no decay; fails every estimate).

The verifiers are sampling-based falsifiers: they report worst ratios
|LHS| / RHS with reproducible witnesses rather than proving bounds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lattice import ShiftBits, ShiftedLattice, level_whitney_nodes
from .measure import DominatingFunction, FactorMeasure
from .torus import point_dist


class KernelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# envelopes


def size_denominator(lam: DominatingFunction, expo: float, t: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """t^e lam(x,t) + |x-y|^e lam(x,|x-y|) as an (|X|, |Y|) matrix."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    A, B = X.shape[0], Y.shape[0]
    lam_t = lam.eval(X, t)  # (A,)
    D = point_dist(X[:, None, :], Y[None, :, :])  # (A, B)
    lam_d = np.empty((A, B))
    for i in range(A):
        lam_d[i] = lam.eval(np.broadcast_to(X[i], (B, X.shape[1])), D[i])
    out = (t ** expo) * lam_t[:, None] + np.where(D > 0, D ** expo * lam_d, 0.0)
    return out


def size_envelope(lam: DominatingFunction, expo: float, t: float, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """The size-condition factor t^e / denominator."""
    return t ** expo / size_denominator(lam, expo, t, X, Y)


def holder_envelope(lam: DominatingFunction, expo: float, t: float, X, Y, Yp) -> np.ndarray:
    """|y-y'|^e / denominator(x, y); Y and Yp are aligned (B, n) batches."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    Yp = np.atleast_2d(Yp)
    dyy = point_dist(Y, Yp)  # (B,)
    den = size_denominator(lam, expo, t, X, Y)
    return dyy[None, :] ** expo / den


# ---------------------------------------------------------------------------
# kernel spec


@dataclass
class KernelSpec:
    """A (t1,t2)-indexed kernel over cell centers.

    factor1/factor2 are present iff `factorized`; eval_full falls back to
    tabulated or composed evaluation. Exponents alpha/beta and the
    dominating functions are what the verifiers normalize against.
    """

    kind: str
    alpha: float
    beta: float
    lam_n: DominatingFunction
    lam_m: DominatingFunction
    factorized: bool
    factor1: Optional[Callable] = None  # (t1, X1, Y1) -> (|X1|, |Y1|)
    factor2: Optional[Callable] = None
    tabulated: Optional[dict] = None  # {"t1": nodes, "t2": nodes, "values": 6-d array}
    params: dict = field(default_factory=dict)

    def eval_full(self, t1: float, t2: float, X1, X2, Y1, Y2) -> np.ndarray:
        """K as a (|X1|, |X2|, |Y1|, |Y2|) array at one (t1, t2)."""
        if self.factorized:
            K1 = self.factor1(t1, X1, Y1)
            K2 = self.factor2(t2, X2, Y2)
            return np.einsum("ik,jl->ijkl", K1, K2)
        if self.tabulated is not None:
            i1 = _node_index(self.tabulated["t1"], t1)
            i2 = _node_index(self.tabulated["t2"], t2)
            V = self.tabulated["values"][i1, i2]
            c1 = _cells_of(X1, self.tabulated["L_n"], self.tabulated["n_dim"])
            c2 = _cells_of(X2, self.tabulated["L_m"], self.tabulated["m_dim"])
            d1 = _cells_of(Y1, self.tabulated["L_n"], self.tabulated["n_dim"])
            d2 = _cells_of(Y2, self.tabulated["L_m"], self.tabulated["m_dim"])
            return V[np.ix_(c1, c2, d1, d2)]
        raise KernelError("kernel has neither factors nor a tabulation")

    def point_eval(self, t1: float, t2: float, x1, x2, y1, y2) -> np.ndarray:
        """K on an aligned batch of S argument tuples -> (S,)."""
        x1, x2, y1, y2 = (np.atleast_2d(a) for a in (x1, x2, y1, y2))
        S = x1.shape[0]
        if self.factorized:
            out = np.empty(S, dtype=complex)
            for i in range(S):
                out[i] = self.factor1(t1, x1[i : i + 1], y1[i : i + 1])[0, 0] * self.factor2(
                    t2, x2[i : i + 1], y2[i : i + 1]
                )[0, 0]
            return out if np.iscomplexobj(out) and np.any(out.imag != 0) else out.real
        out = np.empty(S, dtype=complex)
        for i in range(S):
            out[i] = self.eval_full(t1, t2, x1[i : i + 1], x2[i : i + 1], y1[i : i + 1], y2[i : i + 1])[
                0, 0, 0, 0
            ]
        return out if np.any(out.imag != 0) else out.real


def _node_index(nodes: np.ndarray, t: float) -> int:
    hits = np.nonzero(np.isclose(nodes, t, rtol=1e-12, atol=0.0))[0]
    if hits.size != 1:
        raise KernelError(f"t={t} is not a quadrature node of this tabulated kernel")
    return int(hits[0])


def _cells_of(points, L: int, n: int) -> np.ndarray:
    pts = np.atleast_2d(points)
    N = 1 << L
    idx = np.minimum((pts * N).astype(int), N - 1)
    return idx[:, 0] if n == 1 else idx[:, 0] * N + idx[:, 1]


# ---------------------------------------------------------------------------
# builtins


def _oscillation(t: float, Y: np.ndarray) -> np.ndarray:
    """Smooth scale-adapted factor cos(2 pi k_t sum(y)); Lebesgue mean zero.

    k_t = 2^level is constant on each Whitney slab (2^-(j+1), 2^-j], so the
    t-integrand stays smooth inside every quadrature slab.
    """
    import math

    k = max(1, 1 << max(0, int(math.floor(-math.log2(t)))))
    # the fixed phase keeps the factor away from the grid's cosine zeros
    return np.cos(2.0 * np.pi * k * Y.sum(axis=-1) + 1.0)


def make_builtin(kind: str, params: dict) -> KernelSpec:
    """Construct one of the built-in kernel families.

    standard_product params: alpha, beta, lam_n, lam_m, c (default 1),
    sign_factor (default True). b_annihilating additionally: b1, b2, M_n,
    M_m. violator: alpha, beta, lam_n, lam_m only.
    """
    alpha = params["alpha"]
    beta = params["beta"]
    lam_n = params["lam_n"]
    lam_m = params["lam_m"]
    if kind == "standard_product":
        c = params.get("c", 1.0)
        osc = params.get("sign_factor", True)

        def f1(t, X, Y, _lam=lam_n, _e=alpha, _c=c, _osc=osc):
            env = _c * size_envelope(_lam, _e, t, X, Y)
            if _osc:
                env = env * _oscillation(t, np.atleast_2d(Y))[None, :]
            return env

        def f2(t, X, Y, _lam=lam_m, _e=beta, _osc=osc):
            env = size_envelope(_lam, _e, t, X, Y)
            if _osc:
                env = env * _oscillation(t, np.atleast_2d(Y))[None, :]
            return env

        return KernelSpec(kind, alpha, beta, lam_n, lam_m, True, f1, f2, params={"c": c, "sign_factor": osc})

    if kind == "violator":

        def ones(t, X, Y):
            return np.ones((np.atleast_2d(X).shape[0], np.atleast_2d(Y).shape[0]))

        return KernelSpec(kind, alpha, beta, lam_n, lam_m, True, ones, ones)

    if kind == "b_annihilating":
        from .haar import haar_function  # local import to avoid a cycle

        M_n: FactorMeasure = params["M_n"]
        M_m: FactorMeasure = params["M_m"]
        b1 = np.asarray(params["b1"]).ravel()
        b2 = np.asarray(params["b2"]).ravel()
        lat_n = ShiftedLattice(M_n.n, M_n.L, ShiftBits.zero(M_n.n, M_n.L), r=1, gamma=0.25)
        lat_m = ShiftedLattice(M_m.n, M_m.L, ShiftBits.zero(M_m.n, M_m.L), r=1, gamma=0.25)
        g = haar_function(M_n, b1, lat_n.cube(0, (0,) * M_n.n), 1).values
        h = haar_function(M_m, b2, lat_m.cube(0, (0,) * M_m.n), 1).values

        def f1(t, X, Y, _lam=lam_n, _g=g, _M=M_n):
            X = np.atleast_2d(X)
            w = 1.0 / _lam.eval(X, t)
            return w[:, None] * _g[_cells_of(Y, _M.L, _M.n)][None, :]

        def f2(t, X, Y, _lam=lam_m, _h=h, _M=M_m):
            X = np.atleast_2d(X)
            w = 1.0 / _lam.eval(X, t)
            return w[:, None] * _h[_cells_of(Y, _M.L, _M.n)][None, :]

        return KernelSpec(kind, alpha, beta, lam_n, lam_m, True, f1, f2)

    raise KernelError(f"unknown builtin kernel {kind!r}")


# ---------------------------------------------------------------------------
# applying Theta


def apply_theta(K: KernelSpec, f, M_n: FactorMeasure, M_m: FactorMeasure, t1: float, t2: float) -> np.ndarray:
    """Theta_{t1,t2} f on all product cell centers: exact weighted cell sum."""
    F = np.asarray(f)
    if F.shape != (M_n.num_cells, M_m.num_cells):
        raise KernelError(f"f has shape {F.shape}, expected {(M_n.num_cells, M_m.num_cells)}")
    X1 = M_n.cell_centers()
    X2 = M_m.cell_centers()
    Fw = F * M_n.weights[:, None] * M_m.weights[None, :]
    if K.factorized:
        K1 = K.factor1(t1, X1, X1)
        K2 = K.factor2(t2, X2, X2)
        return K1 @ Fw @ K2.T
    big = K.eval_full(t1, t2, X1, X2, X1, X2)
    return np.einsum("ijkl,kl->ij", big, Fw)


# ---------------------------------------------------------------------------
# estimate verifiers


@dataclass(frozen=True)
class EstimateReport:
    """Worst |LHS|/RHS ratio of one kernel-estimate mode over a sample plan."""

    mode: str
    max_ratio: float
    witness: Optional[dict]
    samples: int
    rejected: int
    passed: bool
    constant: float

    def to_dict(self):
        from .reports import _clean

        return _clean(
            {
                "mode": self.mode,
                "max_ratio": self.max_ratio,
                "witness": self.witness,
                "samples": self.samples,
                "rejected": self.rejected,
                "passed": self.passed,
                "constant": self.constant,
            }
        )


@dataclass(frozen=True)
class SamplePlan:
    """Random argument tuples for verify_estimates.

    Points are cell centers; t values are Whitney nodes of levels
    0..L-1 (per factor); y' companions respect |y - y'| < t/2 and samples
    with no admissible companion are rejected and counted.
    """

    M_n: FactorMeasure
    M_m: FactorMeasure
    count: int = 200
    G: int = 4
    seed: int = 0


def _t_nodes(L: int, G: int) -> np.ndarray:
    return np.concatenate([level_whitney_nodes(j, G)[0] for j in range(L)])


def _companion(rng, centers: np.ndarray, y_idx: int, t: float):
    """Index of a center y' != y with periodic dist(y, y') < t/2, or None."""
    d = point_dist(centers[y_idx][None, :], centers)
    ok = np.nonzero((d > 0) & (d < t / 2))[0]
    if ok.size == 0:
        return None
    return int(rng.choice(ok))


def verify_estimates(K: KernelSpec, mode: str, plan: SamplePlan, constant: float = np.inf) -> EstimateReport:
    """Sample-based falsifier for the pointwise kernel estimates (size / holder / mixed)."""
    if mode not in ("size", "holder", "mixed_y2", "mixed_y1"):
        raise KernelError(f"unknown estimate mode {mode!r}")
    rng = np.random.default_rng(plan.seed)
    C1 = plan.M_n.cell_centers()
    C2 = plan.M_m.cell_centers()
    T1 = _t_nodes(plan.M_n.L, plan.G)
    T2 = _t_nodes(plan.M_m.L, plan.G)
    worst = 0.0
    witness = None
    rejected = 0
    for _ in range(plan.count):
        i_x1, i_y1 = rng.integers(0, C1.shape[0], 2)
        i_x2, i_y2 = rng.integers(0, C2.shape[0], 2)
        t1 = float(rng.choice(T1))
        t2 = float(rng.choice(T2))
        x1, y1 = C1[i_x1 : i_x1 + 1], C1[i_y1 : i_y1 + 1]
        x2, y2 = C2[i_x2 : i_x2 + 1], C2[i_y2 : i_y2 + 1]
        need_y1p = mode in ("holder", "mixed_y1")
        need_y2p = mode in ("holder", "mixed_y2")
        y1p = y2p = None
        if need_y1p:
            j = _companion(rng, C1, int(i_y1), t1)
            if j is None:
                rejected += 1
                continue
            y1p = C1[j : j + 1]
        if need_y2p:
            j = _companion(rng, C2, int(i_y2), t2)
            if j is None:
                rejected += 1
                continue
            y2p = C2[j : j + 1]

        def kval(a1, a2):
            return complex(K.point_eval(t1, t2, x1, x2, a1, a2)[0])

        if mode == "size":
            lhs = abs(kval(y1, y2))
            rhs = float(size_envelope(K.lam_n, K.alpha, t1, x1, y1)[0, 0]) * float(
                size_envelope(K.lam_m, K.beta, t2, x2, y2)[0, 0]
            )
        elif mode == "holder":
            lhs = abs(kval(y1, y2) - kval(y1, y2p) - kval(y1p, y2) + kval(y1p, y2p))
            rhs = float(holder_envelope(K.lam_n, K.alpha, t1, x1, y1, y1p)[0, 0]) * float(
                holder_envelope(K.lam_m, K.beta, t2, x2, y2, y2p)[0, 0]
            )
        elif mode == "mixed_y2":
            lhs = abs(kval(y1, y2) - kval(y1, y2p))
            rhs = float(size_envelope(K.lam_n, K.alpha, t1, x1, y1)[0, 0]) * float(
                holder_envelope(K.lam_m, K.beta, t2, x2, y2, y2p)[0, 0]
            )
        else:  # mixed_y1
            lhs = abs(kval(y1, y2) - kval(y1p, y2))
            rhs = float(holder_envelope(K.lam_n, K.alpha, t1, x1, y1, y1p)[0, 0]) * float(
                size_envelope(K.lam_m, K.beta, t2, x2, y2)[0, 0]
            )
        if rhs == 0.0:
            rejected += 1
            continue
        ratio = lhs / rhs
        if ratio > worst:
            worst = ratio
            witness = {
                "x1": x1[0].tolist(),
                "x2": x2[0].tolist(),
                "y1": y1[0].tolist(),
                "y2": y2[0].tolist(),
                "y1p": None if y1p is None else y1p[0].tolist(),
                "y2p": None if y2p is None else y2p[0].tolist(),
                "t1": t1,
                "t2": t2,
            }
    return EstimateReport(
        mode=mode,
        max_ratio=worst,
        witness=witness,
        samples=plan.count,
        rejected=rejected,
        passed=bool(worst <= constant),
        constant=constant,
    )


@dataclass(frozen=True)
class CubePlan:
    """Test cubes and exterior arguments for verify_carleson_assumptions."""

    lat_n: ShiftedLattice
    lat_m: ShiftedLattice
    cubes_per_level: int = 2
    exterior_samples: int = 6
    G: int = 4
    seed: int = 0


def _box_lhs(b_vals, M_box: FactorMeasure, cube, G, inner_factor, outer_value):
    """( sum over the truncated Carleson box of |int_I b K dmu|^2 )^(1/2).

    inner_factor(t) -> (|box cells|, |box cells|) kernel factor on the box
    factor; outer_value is the fixed other-factor scalar multiplying it.
    """
    cells = cube.cell_indices()
    w = M_box.weights[cells]
    bw = np.asarray(b_vals).ravel()[cells] * w
    acc = 0.0
    for level in range(cube.level, M_box.L + 1):
        nodes, wts = level_whitney_nodes(level, G)
        for t, wt in zip(nodes, wts):
            Kmat = inner_factor(float(t))
            inner = Kmat @ bw  # (cells,)
            acc += wt * float(np.sum(w * np.abs(outer_value * inner) ** 2))
    return acc ** 0.5


def verify_carleson_assumptions(
    K: KernelSpec,
    b1,
    b2,
    M_n: FactorMeasure,
    M_m: FactorMeasure,
    mode: str,
    plan: CubePlan,
    constant: float = np.inf,
) -> EstimateReport:
    """Sample-based falsifier for the Carleson-box estimates (size / holder), both orientations.

    The Carleson box integral is discretized as the union of Whitney slabs
    of all subcubes (t in (2^-L-1, ell(I)]), with x ranging over the cube's
    cells at every slab; exterior arguments are drawn from the plan.
    """
    if mode not in ("size", "holder"):
        raise KernelError(f"unknown carleson mode {mode!r}")
    if not K.factorized:
        raise KernelError("verify_carleson_assumptions requires a factorized kernel at desk scale")
    rng = np.random.default_rng(plan.seed)
    C1 = M_n.cell_centers()
    C2 = M_m.cell_centers()
    T1 = _t_nodes(M_n.L, plan.G)
    T2 = _t_nodes(M_m.L, plan.G)
    worst = 0.0
    witness = None
    rejected = 0
    samples = 0

    def orientation(box_M, box_lat, box_b, box_centers, ext_M, ext_centers, ext_T, factor_inner, factor_outer, lam_ext, expo_ext, name):
        nonlocal worst, witness, rejected, samples
        for level in range(box_lat.L + 1):
            cubes = box_lat.cubes(level)
            take = min(plan.cubes_per_level, len(cubes))
            picks = rng.choice(len(cubes), size=take, replace=False)
            for pi in picks:
                cube = cubes[int(pi)]
                if cube.mass(box_M) == 0:
                    continue
                cells = cube.cell_indices()
                Xbox = box_centers[cells]
                for _ in range(plan.exterior_samples):
                    samples += 1
                    ix = int(rng.integers(0, ext_centers.shape[0]))
                    iy = int(rng.integers(0, ext_centers.shape[0]))
                    x_ext = ext_centers[ix : ix + 1]
                    y_ext = ext_centers[iy : iy + 1]
                    t_ext = float(rng.choice(ext_T))
                    if mode == "size":
                        outer = complex(factor_outer(t_ext, x_ext, y_ext)[0, 0])
                        rhs = (
                            t_ext ** expo_ext
                            / float(size_denominator(lam_ext, expo_ext, t_ext, x_ext, y_ext)[0, 0])
                            * cube.mass(box_M) ** 0.5
                        )
                    else:
                        j = _companion(rng, ext_centers, iy, t_ext)
                        if j is None:
                            rejected += 1
                            continue
                        y_ext_p = ext_centers[j : j + 1]
                        outer = complex(
                            factor_outer(t_ext, x_ext, y_ext)[0, 0] - factor_outer(t_ext, x_ext, y_ext_p)[0, 0]
                        )
                        rhs = (
                            float(point_dist(y_ext, y_ext_p)[0]) ** expo_ext
                            / float(size_denominator(lam_ext, expo_ext, t_ext, x_ext, y_ext)[0, 0])
                            * cube.mass(box_M) ** 0.5
                        )
                    lhs = _box_lhs(
                        box_b,
                        box_M,
                        cube,
                        plan.G,
                        lambda t: factor_inner(t, Xbox, Xbox),
                        outer,
                    )
                    if rhs == 0.0:
                        rejected += 1
                        continue
                    ratio = lhs / rhs
                    if ratio > worst:
                        worst = ratio
                        witness = {
                            "orientation": name,
                            "cube_level": cube.level,
                            "cube_index": list(cube.index),
                            "x_ext": x_ext[0].tolist(),
                            "y_ext": y_ext[0].tolist(),
                            "t_ext": t_ext,
                        }

    orientation(M_n, plan.lat_n, b1, C1, M_m, C2, T2, K.factor1, K.factor2, K.lam_m, K.beta, "box_over_factor_n")
    orientation(M_m, plan.lat_m, b2, C2, M_n, C1, T1, K.factor2, K.factor1, K.lam_n, K.alpha, "box_over_factor_m")
    return EstimateReport(
        mode=f"carleson_{mode}",
        max_ratio=worst,
        witness=witness,
        samples=samples,
        rejected=rejected,
        passed=bool(worst <= constant),
        constant=constant,
    )


# ---------------------------------------------------------------------------
# tabulated kernels (binary interface)

_MAGIC = b"DYKT"


def save_tabulated(path, t1_nodes, t2_nodes, values, L_n: int, n_dim: int, L_m: int, m_dim: int) -> None:
    """dims header + row-major float64 values (re, then im if complex)."""
    values = np.asarray(values)
    iscomplex = np.iscomplexobj(values)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<7q", len(t1_nodes), len(t2_nodes), L_n, n_dim, L_m, m_dim, int(iscomplex)))
        np.asarray(t1_nodes, dtype=float).tofile(fh)
        np.asarray(t2_nodes, dtype=float).tofile(fh)
        np.ascontiguousarray(values.real, dtype=float).tofile(fh)
        if iscomplex:
            np.ascontiguousarray(values.imag, dtype=float).tofile(fh)


def load_tabulated(path, alpha: float, beta: float, lam_n: DominatingFunction, lam_m: DominatingFunction) -> KernelSpec:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise KernelError(f"{path}: not a dyadica tabulated kernel")
        nt1, nt2, L_n, n_dim, L_m, m_dim, iscomplex = struct.unpack("<7q", fh.read(56))
        t1 = np.fromfile(fh, dtype=float, count=nt1)
        t2 = np.fromfile(fh, dtype=float, count=nt2)
        c1 = 1 << (L_n * n_dim)
        c2 = 1 << (L_m * m_dim)
        shape = (nt1, nt2, c1, c2, c1, c2)
        re = np.fromfile(fh, dtype=float, count=int(np.prod(shape))).reshape(shape)
        vals = re + 1j * np.fromfile(fh, dtype=float, count=int(np.prod(shape))).reshape(shape) if iscomplex else re
    tab = {"t1": t1, "t2": t2, "values": vals, "L_n": int(L_n), "n_dim": int(n_dim), "L_m": int(L_m), "m_dim": int(m_dim)}
    return KernelSpec("tabulated", alpha, beta, lam_n, lam_m, False, tabulated=tab)
