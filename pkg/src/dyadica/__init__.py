"""dyadica: executable non-homogeneous bi-parameter dyadic analysis.

Subpackages cover discrete upper-doubling measures (measure), randomly
shifted dyadic lattices with good/bad cubes (lattice), b-adapted Haar
systems (haar), kernel families and estimate verifiers (kernel), the
discretized bi-parameter g-function with its averaging identity
(gfunction), Carleson-condition machinery (carleson), and the CLI /
experiment harness (harness).
"""

__version__ = "0.1.0"
