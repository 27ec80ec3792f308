"""Quasilinear obstacle problems for the p-Laplacian on the first Heisenberg group.

Finite-difference discretisation on a box of H^1, solvers for the obstacle
problem and its penalised companion, and numerical checks of the two-sided
operator bound, the penalisation sandwich, the eps-convergence rates and a
set of elementary inequalities.
"""

__version__ = "0.1.0"
