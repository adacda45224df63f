"""Measure module: worked examples, exact prefix sums, dominating functions."""

import math

import numpy as np
import pytest

from dyadica import measure as ms
from dyadica import torus


def test_uniform_masses():
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    assert M.total_mass == 1.0
    assert M.box_mass((0,), (4,)) == 0.5


def test_two_cell_sum():
    M = ms.build_factor_measure(1, 1, [0.75, 0.25])
    assert M.box_mass((1,), (1,)) == 0.25


def test_direct_sum_L2():
    M = ms.build_factor_measure(1, 2, [0.1, 0.2, 0.3, 0.4])
    assert M.box_mass((1,), (2,)) == 0.5


def test_rejections():
    with pytest.raises(ms.MeasureError, match="negative weight at cell index 2"):
        ms.build_factor_measure(1, 2, [0.1, 0.2, -0.3, 0.4])
    with pytest.raises(ms.MeasureError, match="zero total mass"):
        ms.build_factor_measure(1, 1, [0.0, 0.0])
    with pytest.raises(ms.MeasureError):
        ms.build_factor_measure(1, 2, [0.1] * 3)


def test_prefix_equals_fsum_oracle():
    # exact integer prefix sums match correctly rounded direct summation
    rng = np.random.default_rng(11)
    for n in (1, 2):
        L = 4 if n == 1 else 3
        N = 1 << L
        w = rng.exponential(size=(1 << (L * n),)) * rng.uniform(1e-8, 1e3)
        M = ms.build_factor_measure(n, L, w)
        grid = M.grid()
        for _ in range(500):
            starts = tuple(int(rng.integers(0, N)) for _ in range(n))
            widths = tuple(int(rng.integers(1, N + 1)) for _ in range(n))
            cells = []
            if n == 1:
                cells = [grid[(starts[0] + k) % N] for k in range(widths[0])]
            else:
                for k1 in range(widths[0]):
                    for k2 in range(widths[1]):
                        cells.append(grid[(starts[0] + k1) % N, (starts[1] + k2) % N])
            assert M.box_mass(starts, widths) == math.fsum(cells)


def test_ball_mass_examples():
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    assert ms.ball_mass(M, 0.5, 0.25) == pytest.approx(0.5, abs=1e-15)
    assert ms.ball_mass(M, 0.0, 0.25) == pytest.approx(0.5, abs=1e-15)  # wraps
    M2 = ms.build_factor_measure(1, 1, [0.75, 0.25])
    assert ms.ball_mass(M2, 0.25, 0.25) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(ms.MeasureError):
        ms.ball_mass(M, 0.5, 0.75)
    with pytest.raises(ms.MeasureError):
        ms.ball_mass(M, 0.5, 0.0)


def test_ball_mass_continuity_in_r():
    M = ms.preset_measure("random-dirichlet", 1, 4, seed=5)
    vals = [ms.ball_mass(M, 0.3, r) for r in np.linspace(0.05, 0.5, 50)]
    diffs = np.diff(vals)
    assert np.all(diffs >= -1e-15)  # monotone
    assert np.max(np.abs(diffs)) < 0.2  # no jumps at desk scale


def test_upper_doubling_pass_and_fail():
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    rep = ms.verify_upper_doubling(M, ms.power_law_dominating(2.0, 1.0))
    assert rep.passed and rep.value <= 1.0 + 1e-9
    assert rep.details["empirical_C_lambda"] == pytest.approx(2.0)
    rep2 = ms.verify_upper_doubling(M, ms.power_law_dominating(0.5, 1.0))
    assert not rep2.passed
    assert rep2.details["minimal_rescale"] == pytest.approx(4.0)


def test_upper_doubling_exhaustive_scan_two_cell():
    M = ms.build_factor_measure(1, 1, [0.75, 0.25])
    lam = ms.power_law_dominating(2.0, 1.0)
    rep = ms.verify_upper_doubling(M, lam)
    # oracle: exhaustive max over cells x dyadic radii of ball mass / lam
    worst = max(
        ms.ball_mass(M, x, r) / lam.at([x], r)
        for x in (0.25, 0.75)
        for r in (0.5,)
    )
    assert rep.value == pytest.approx(worst)


def test_power_law_invariants():
    lam = ms.power_law_dominating(3.0, 1.5)
    assert lam.c_lambda == 2.0 ** 1.5
    assert lam.d_lambda == pytest.approx(1.5)
    with pytest.raises(ms.MeasureError):
        ms.power_law_dominating(0.0, 1.0)


def test_symmetrize_x_independent_fixed_point():
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    lam = ms.tabulate_dominating(lambda x, r: 2 * r, M, 2.0)
    sym, rep = ms.symmetrize_dominating(lam, M)
    assert rep.passed
    np.testing.assert_allclose(sym.values, lam.values, rtol=1e-14)


def test_symmetrize_brute_force_oracle():
    # lam(x, r) = 2r(1+x): minimum realized over cell centers z
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    lam = ms.tabulate_dominating(lambda x, r: 2 * r * (1 + x[0]), M, 2.0)
    sym, rep = ms.symmetrize_dominating(lam, M)
    assert rep.passed
    centers = M.cell_centers()
    for i in (0, 3, 5):
        x = centers[i]
        for r in (0.25, 0.5):
            manual = min(
                2 * (r + float(torus.point_dist(x[None, :], z[None, :])[0])) * (1 + z[0]) for z in centers
            )
            assert sym.at(x, r) == pytest.approx(manual, rel=1e-12)
            assert sym.at(x, r) <= lam.at(x, r) + 1e-15


def test_pseudo_accretive_examples():
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    rep = ms.verify_pseudo_accretive(np.ones(8), M)
    assert rep.passed and rep.value == 1.0
    b = np.ones(8)
    b[4:] = -1.0
    rep2 = ms.verify_pseudo_accretive(b, M)
    assert not rep2.passed and rep2.value == 0.0
    assert rep2.witness == {"level": 0, "index": 0}
    h = 1.0 + 0.5 * np.array([1.0, -1.0] * 4)
    rep3 = ms.verify_pseudo_accretive(h, M)
    assert rep3.value == pytest.approx(0.5)


def test_pseudo_accretive_exhaustive_oracle():
    rng = np.random.default_rng(4)
    M = ms.preset_measure("random-dirichlet", 1, 3, seed=9)
    b = 1 + 0.5 * rng.uniform(-1, 1, 8)
    rep = ms.verify_pseudo_accretive(b, M)
    best = np.inf
    for level in range(4):
        width = 1 << (3 - level)
        for i in range(1 << level):
            mass = M.weights[i * width : (i + 1) * width].sum()
            if mass == 0:
                continue
            best = min(best, abs((b * M.weights)[i * width : (i + 1) * width].sum()) / mass)
    assert rep.value == pytest.approx(best, rel=1e-12)


def test_pseudo_accretive_zero_mass_skipped():
    w = np.zeros(8)
    w[:2] = [0.75, 0.25]
    M = ms.build_factor_measure(1, 3, w)
    rep = ms.verify_pseudo_accretive(np.ones(8), M, threshold=0.0)
    assert rep.passed
    assert rep.skipped > 0


def test_make_accretive_raises_on_cancellation():
    M = ms.build_factor_measure(1, 3, [2 ** -3] * 8)
    b = np.ones(8)
    b[4:] = -1.0
    with pytest.raises(ms.MeasureError, match="not pseudo-accretive"):
        ms.make_accretive(b, M)
    acc = ms.make_accretive(np.ones(8), M)
    assert acc.accretivity_constant == 1.0 and acc.sup_norm == 1.0


def test_csv_round_trip(tmp_path):
    path = tmp_path / "w.csv"
    rng = np.random.default_rng(0)
    w = rng.dirichlet(np.ones(16))
    ms.save_weights_csv(path, w, 1, 4)
    n, L, vals = ms.load_weights_csv(path)
    assert (n, L) == (1, 4)
    np.testing.assert_array_equal(vals, w)


def test_presets():
    M = ms.preset_measure("two-cell", 1, 1, seed=0)
    assert list(M.weights) == [0.75, 0.25]
    M2 = ms.preset_measure("random-dirichlet", 1, 3, seed=1)
    assert M2.total_mass == pytest.approx(1.0)
    b = ms.preset_b("random-accretive", M2, seed=2, strength=0.5)
    assert np.all(b >= 0.5) and np.all(b <= 1.5)
    with pytest.raises(ms.MeasureError):
        ms.preset_b("random-accretive", M2, strength=0.9)
