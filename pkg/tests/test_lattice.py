"""Lattice module: shifts, nestedness, goodness vs oracle, pi_good, Whitney."""

import math

import numpy as np
import pytest

from dyadica import lattice as lt
from dyadica.harness.suite import goodness_oracle


def test_sigma_formula_example():
    # n=1, L=2, beta^1 = 0, beta^2 = 1: sigma_1 = sigma_0 = 1/4
    bits = lt.ShiftBits(n=1, L=2, bits=((0,), (1,)))
    lattice = lt.ShiftedLattice(1, 2, bits, r=1, gamma=0.25)
    assert lattice.shift_cells[0][0] == 1 and lattice.shift_cells[1][0] == 1
    assert lattice.shift_cells[2][0] == 0  # sigma_L = 0
    c0, c1 = lattice.cubes(1)
    assert c0.start_cells == (1,) and c1.start_cells == (3,)  # [1/4,3/4), [3/4,1/4)


def test_zero_bits_standard_grid():
    lattice = lt.ShiftedLattice(1, 3, lt.ShiftBits.zero(1, 3), r=1, gamma=0.25)
    assert np.all(lattice.shift_cells == 0)
    assert lattice.cube(2, (1,)).center[0] == pytest.approx(0.375)


def test_nestedness_exhaustive():
    for seed in range(5):
        for n, L in ((1, 6), (2, 3)):
            lattice = lt.build_lattice(n, L, seed, r=1, gamma=0.25)
            for level in range(1, L + 1):
                for cube in lattice.cubes(level):
                    parent = cube.parent()
                    assert set(cube.cell_indices()) <= set(parent.cell_indices())


def test_children_partition():
    lattice = lt.build_lattice(2, 3, 7, r=1, gamma=0.25)
    for cube in lattice.cubes(1):
        kids = cube.children()
        assert len(kids) == 4
        cells = np.sort(np.concatenate([k.cell_indices() for k in kids]))
        np.testing.assert_array_equal(cells, np.sort(cube.cell_indices()))


def test_navigation_examples():
    lattice = lt.ShiftedLattice(1, 3, lt.ShiftBits.zero(1, 3), r=1, gamma=0.25)
    I = lattice.cube(2, (0,))  # [0, 1/4)
    assert lt.navigate(I, "ancestor", 1).start_cells == (0,)  # [0, 1/2)
    assert lt.navigate(I, "ancestor", 1).level == 1
    assert lt.navigate(I, "ancestor", 0) is I
    with pytest.raises(lt.LatticeError):
        lt.navigate(I, "ancestor", 3)
    with pytest.raises(lt.LatticeError):
        lattice.cube(3, (0,)).children()


def test_shifted_ancestor_containment_scan():
    # level-2 cube containing 0.3 in the shifted grid of the sigma example
    bits = lt.ShiftBits(n=1, L=2, bits=((0,), (1,)))
    lattice = lt.ShiftedLattice(1, 2, bits, r=1, gamma=0.25)
    cell_of_point = int(0.3 * 4)
    holder = [c for c in lattice.cubes(2) if cell_of_point in c.cell_indices()][0]
    anc = holder.ancestor(1)
    assert anc.start_cells == (1,)  # the level-1 cube [1/4, 3/4)
    assert set(holder.cell_indices()) <= set(anc.cell_indices())


def test_gamma_from():
    assert lt.gamma_from(1.0, 1.0) == pytest.approx(0.25)
    assert lt.gamma_from(1.0, 3.0) == pytest.approx(0.125)
    assert lt.gamma_from(4.0, 1.0) == pytest.approx(0.4)
    with pytest.raises(lt.LatticeError):
        lt.gamma_from(0.0, 1.0)


def test_default_r():
    assert lt.default_r(0.25) == 5
    assert lt.default_r(0.3) == 4


def test_badness_example_L4():
    lattice = lt.ShiftedLattice(1, 4, lt.ShiftBits.zero(1, 4), r=1, gamma=0.25)
    I = lattice.cube(4, (7,))  # [7/16, 8/16)
    good, witness = lt.classify_goodness(lattice, I)
    assert not good
    assert witness is not None
    assert lt.cube_boundary_dist(I, witness) <= lt.goodness_threshold(4, witness.level, 0.25)


def test_trivial_goodness_small_depth():
    # no J with ell(J) >= 2^r ell(I) below the boundaryless root: all good
    lattice = lt.build_lattice(1, 3, 5, r=4, gamma=0.25)
    assert all(lt.classify_goodness(lattice, c)[0] for c in lattice.all_cubes())


def test_classifier_matches_oracle_everywhere():
    rng = np.random.default_rng(2)
    for L in range(1, 6):
        for params in ((1, 0.25), (2, 0.4), (5, 0.25)):
            r, gamma = params
            lattice = lt.build_lattice(1, L, int(rng.integers(1 << 30)), r=r, gamma=gamma)
            for cube in lattice.all_cubes():
                fast = lt.classify_goodness(lattice, cube)[0]
                slow = goodness_oracle(lattice, cube)[0]
                assert fast == slow, (L, r, gamma, cube)


def test_classifier_matches_oracle_2d():
    lattice = lt.build_lattice(2, 3, 11, r=1, gamma=0.3)
    for cube in lattice.all_cubes():
        assert lt.classify_goodness(lattice, cube)[0] == goodness_oracle(lattice, cube)[0]


def test_goodness_depends_on_prefix_position_on_suffix():
    # flipping suffix bits moves the cube but keeps its goodness; flipping
    # prefix bits may change goodness but keeps the position
    n, L, level = 1, 6, 4
    rng = np.random.default_rng(3)
    for _ in range(20):
        raw = rng.integers(0, 2, size=(L, n))
        bits = lt.ShiftBits(n=n, L=L, bits=tuple(tuple(int(v) for v in row) for row in raw))
        lattice = lt.ShiftedLattice(n, L, bits, r=2, gamma=0.3)
        cube = lattice.cube(level, (3,))
        # suffix flip: bits at levels > `level`
        raw2 = raw.copy()
        raw2[level:, :] = 1 - raw2[level:, :]
        lat2 = lt.ShiftedLattice(n, L, lt.ShiftBits(n=n, L=L, bits=tuple(tuple(int(v) for v in r_) for r_ in raw2)), r=2, gamma=0.3)
        cube2 = lat2.cube(level, (3,))
        assert lattice.is_good(cube) == lat2.is_good(cube2)
        # prefix flip: position unchanged
        raw3 = raw.copy()
        raw3[:level, :] = 1 - raw3[:level, :]
        lat3 = lt.ShiftedLattice(n, L, lt.ShiftBits(n=n, L=L, bits=tuple(tuple(int(v) for v in r_) for r_ in raw3)), r=2, gamma=0.3)
        assert lat3.cube(level, (3,)).start_cells == cube.start_cells


def test_pi_good_r_exceeds_level():
    for j in range(3):
        p, se = lt.pi_good(1, 4, 4, 0.25, j, "exact")
        assert p == 1.0 and se == 0.0


def test_pi_good_gamma_to_zero():
    # tiny gamma makes the badness threshold huge: pi < 1 (here 0)
    p, _ = lt.pi_good(1, 3, 1, 1e-9, 2, "exact")
    assert p < 1.0


def test_pi_good_exact_vs_mc():
    pe, _ = lt.pi_good(1, 3, 1, 0.25, 3, "exact")
    pm, se = lt.pi_good(1, 3, 1, 0.25, 3, "monte_carlo", trials=2000, seed=1)
    assert abs(pm - pe) <= 3 * se + 1e-12
    pe7, _ = lt.pi_good(1, 7, 6, 0.25, 7, "exact")
    assert 0.0 < pe7 < 1.0
    pm7, se7 = lt.pi_good(1, 7, 6, 0.25, 7, "monte_carlo", trials=3000, seed=2)
    assert abs(pm7 - pe7) <= 3 * se7


def test_pi_good_index_independence():
    for idx in ((0,), (1,), (5,)):
        p, _ = lt.pi_good(1, 6, 5, 0.25, 6, "exact", index=idx)
        assert p == pytest.approx(lt.pi_good(1, 6, 5, 0.25, 6, "exact")[0])


def test_pi_good_cost_guard():
    with pytest.raises(lt.LatticeError, match="refused"):
        lt.pi_good(2, 13, 5, 0.25, 13, "exact")


def test_whitney_quadrature_examples():
    lattice = lt.build_lattice(1, 3, 0, r=1, gamma=0.25)
    cube = lattice.cube(0, (0,))
    wn = lt.whitney_quadrature(cube, 1)
    assert wn.nodes[0] == pytest.approx(1 / math.sqrt(2))
    assert wn.weights.sum() == math.log(2.0)
    nodes, weights = lt.level_whitney_nodes(0, 2)
    np.testing.assert_allclose(nodes, [2 ** -0.25, 2 ** -0.75])
    assert weights.sum() == math.log(2.0)  # exact for power-of-two G
    # dt/t of a constant reproduced exactly for any G
    for G in (1, 3, 4, 7):
        _, w = lt.level_whitney_nodes(2, G)
        assert w.sum() == pytest.approx(math.log(2.0), abs=1e-15)


def test_whitney_tiling():
    # Whitney regions of one level tile torus x slab for every shift
    for seed in range(5):
        lattice = lt.build_lattice(1, 4, seed, r=1, gamma=0.25)
        for level in range(4):
            cover = np.zeros(16, dtype=int)
            for cube in lattice.cubes(level):
                cover[cube.cell_indices()] += 1
            np.testing.assert_array_equal(cover, np.ones(16, dtype=int))


def test_lattice_validation():
    with pytest.raises(lt.LatticeError):
        lt.build_lattice(1, 3, 0, r=1, gamma=0.5)
    with pytest.raises(lt.LatticeError):
        lt.build_lattice(1, 3, 0, r=0, gamma=0.25)
    with pytest.raises(lt.LatticeError):
        lt.build_lattice(1, 0, 0, r=1, gamma=0.25)


def test_good_cell_mask_matches_classification():
    lattice = lt.build_lattice(1, 5, 9, r=2, gamma=0.3)
    for level in range(5):
        mask = lattice.good_cell_mask(level)
        for cube in lattice.cubes(level):
            expected = lattice.is_good(cube)
            assert np.all(mask[cube.cell_indices()] == expected)
