"""Periodic geometry on [0,1)^n with the ell-infinity metric.

Everything downstream (measures, lattices, kernels) shares these helpers.
Distances between lattice objects are computed in integer "cell units"
(1 cell = 2^-L) so that set distances are exact.
"""

import numpy as np


def wrap(x):
    """Map coordinates into [0,1)."""
    return np.asarray(x, dtype=float) % 1.0


def point_dist(x, y):
    """Periodic ell-infinity distance between points.

    x, y: arrays whose last axis is the coordinate axis (broadcastable).
    """
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    d = np.minimum(d, 1.0 - d)
    return d.max(axis=-1) if d.ndim else d


def axis_point_dist(x, y):
    """Periodic distance per coordinate (no max reduction)."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def arc_gap_cells(a_start, a_width, b_start, b_width, ncells):
    """Gap (in cells) between circular arcs [s, s+w) on Z_ncells; 0 if they meet.

    This is the set distance between the arcs' closures, which matches the
    set distance between the half-open cube faces they discretize.
    """
    fwd = (b_start - (a_start + a_width)) % ncells
    bwd = (a_start - (b_start + b_width)) % ncells
    if fwd + bwd != ncells - a_width - b_width:
        return 0  # arcs overlap
    return min(fwd, bwd)


def arc_to_grid_dist_cells(start, width, spacing, offset):
    """Distance (in cells) from the closed arc [start, start+width] to offset + spacing*Z.

    All arguments are integers; `spacing` divides the circle length, so the
    grid is invariant mod spacing and the circle length drops out.
    """
    u = (offset - start) % spacing
    if u <= width:
        return 0  # a grid point lies on the arc
    return min(spacing - u, u - width)
