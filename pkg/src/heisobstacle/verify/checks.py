"""Pointwise checks on computed solutions: the two-sided operator bound and
the penalisation sandwich."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..operators import (
    discrete_obstacle_operator,
    energy_gradient,
    measured_mask,
    obstacle_operator_bound,
)
from ..solver import ObstacleProblem, SolverResult

LS_CSV_HEADER = ["p", "eps", "tol", "measured", "min_A", "max_excess", "lower_violations",
                 "upper_violations", "excess_mass", "max_excess_discrete", "active_fraction", "pass"]
SANDWICH_CSV_HEADER = ["eta", "tol", "max_u_eta_minus_psi", "max_u_eta_minus_u",
                       "max_u_minus_u_eta_minus_eta", "sup_diff", "barrier_gap",
                       "linf_u_eta", "linf_bound", "pass"]

NEGATIVE_CONTROL_DELTA = 0.1


class UnconvergedInput(ValueError):
    """A check was handed a solve that did not meet its tolerance."""


@dataclass(frozen=True)
class LSReport:
    p: float
    eps: float
    tol: float
    measured: int
    min_A: float
    max_excess: float
    lower_violations: int
    upper_violations: int
    excess_mass: float
    max_excess_discrete: float
    active_fraction: float

    @property
    def passed(self) -> bool:
        return self.lower_violations == 0 and self.upper_violations == 0

    def row(self) -> list:
        return [self.p, self.eps, self.tol, self.measured, self.min_A, self.max_excess,
                self.lower_violations, self.upper_violations, self.excess_mass,
                self.max_excess_discrete, self.active_fraction, int(self.passed)]


def default_ls_tol(prob: ObstacleProblem) -> float:
    return max(1e-6, 10.0 * prob.tol / prob.grid.cell_weight)


def ls_check(result: SolverResult, prob: ObstacleProblem, tol: float | None = None) -> LSReport:
    """Check ``-tol <= A(u) <= (A psi)^+ + tol`` on the measured nodes.

    ``A(u)`` is read off the multiplier (``multiplier / w``); the upper bound is
    the exact continuum operator of the obstacle preset.  The same excess
    against the discrete operator of the sampled obstacle is reported too.
    """
    if not result.converged:
        raise UnconvergedInput("ls_check needs a converged obstacle solve")
    if prob.psi_fn is None:
        raise ValueError("ls_check needs the obstacle as an analytic preset")
    g = prob.grid
    if tol is None:
        tol = default_ls_tol(prob)
    m = measured_mask(g)
    A = result.multiplier / g.cell_weight
    bound = obstacle_operator_bound(prob.psi_fn, g, prob.params)
    dbound = np.maximum(discrete_obstacle_operator(prob.psi_fn, g, prob.params), 0.0)
    a, excess = A[m], (A - bound)[m]
    active = result.active if result.active is not None else np.zeros(g.shape, dtype=bool)
    return LSReport(
        p=prob.params.p, eps=prob.params.eps, tol=float(tol), measured=int(m.sum()),
        min_A=float(a.min()), max_excess=float(excess.max()),
        lower_violations=int(np.count_nonzero(a < -tol)),
        upper_violations=int(np.count_nonzero(excess > tol)),
        excess_mass=float(np.sum(np.maximum(excess, 0.0)) * g.cell_weight),
        max_excess_discrete=float((A - dbound)[m].max()),
        active_fraction=float(np.count_nonzero(active & g.interior) / np.count_nonzero(g.interior)),
    )


def negative_control(result: SolverResult, prob: ObstacleProblem,
                     delta: float = NEGATIVE_CONTROL_DELTA) -> SolverResult:
    """Push the solution down by ``delta`` times a narrow bump inside the contact set.

    The bump is a Gaussian one lattice step wide centred at the measured
    active node closest to the origin; the multiplier is recomputed for the
    perturbed field so that :func:`ls_check` sees its operator values.
    """
    g = prob.grid
    cand = result.active & measured_mask(g) if result.active is not None else None
    if cand is None or not cand.any():
        raise ValueError("negative control needs a nonempty measured contact set")
    x, y, t = g.coords
    r2 = x * x + y * y + t * t
    idx = np.unravel_index(np.argmin(np.where(cand, r2, np.inf)), g.shape)
    cx, cy, ct = (c[idx] for c in g.coords)
    hx, hy, ht = g.spacing
    bump = np.exp(-0.5 * (((x - cx) / hx) ** 2 + ((y - cy) / hy) ** 2 + ((t - ct) / ht) ** 2))
    bump[g.boundary] = 0.0
    u = result.u - delta * bump
    mult = -energy_gradient(g, u, prob.params)
    return replace(result, u=u, multiplier=mult)


@dataclass(frozen=True)
class SandwichReport:
    eta: float
    tol: float
    gap_psi: float
    gap_u: float
    gap_band: float
    sup_diff: float
    barrier_gap: float
    linf_u_eta: float
    linf_bound: float

    @property
    def checks(self) -> dict:
        return {
            "u_eta_below_psi": self.gap_psi <= self.tol,
            "u_eta_below_u": self.gap_u <= self.tol,
            "u_within_eta": self.gap_band <= self.tol,
            "uniform": self.sup_diff <= self.eta + self.tol,
            "barrier": self.barrier_gap >= -1e-8,
            "linf": self.linf_u_eta <= self.linf_bound,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def row(self) -> list:
        return [self.eta, self.tol, self.gap_psi, self.gap_u, self.gap_band, self.sup_diff,
                self.barrier_gap, self.linf_u_eta, self.linf_bound, int(self.passed)]


def sandwich_check(obstacle: SolverResult, penalized: SolverResult, psi: np.ndarray, eta: float,
                   tol: float = 1e-4, *, barrier: float = -np.inf,
                   linf_bound: float = np.inf) -> SandwichReport:
    """Compare the obstacle solution ``u`` with the penalised solution ``u_eta``.

    Checks ``u_eta <= psi``, ``u_eta <= u <= u_eta + eta`` and
    ``sup |u_eta - u| <= eta`` up to ``tol``, plus the lower barrier
    ``u >= barrier`` and ``|u_eta|_inf <= linf_bound`` when those are given
    (see :func:`sandwich_bounds`).
    """
    psi = np.asarray(psi, dtype=float)
    if obstacle.u.shape != penalized.u.shape or psi.shape != obstacle.u.shape:
        raise ValueError(f"mismatched grids: {obstacle.u.shape}, {penalized.u.shape}, {psi.shape}")
    for name, res in (("obstacle", obstacle), ("penalised", penalized)):
        if not res.converged:
            raise UnconvergedInput(f"the {name} solve did not converge")
    u, ue = obstacle.u, penalized.u
    return SandwichReport(
        eta=float(eta), tol=float(tol),
        gap_psi=float(np.max(ue - psi)), gap_u=float(np.max(ue - u)),
        gap_band=float(np.max(u - ue - eta)),
        sup_diff=float(np.max(np.abs(ue - u))), barrier_gap=float(np.min(u) - barrier),
        linf_u_eta=float(np.max(np.abs(ue))), linf_bound=float(linf_bound),
    )


def sandwich_bounds(prob: ObstacleProblem) -> dict:
    """Lower barrier ``mu`` and the sup-norm bound ``2 + |psi|_inf + |u_star|_inf``."""
    return {
        "barrier": prob.barrier,
        "linf_bound": 2.0 + float(np.abs(prob.psi).max()) + float(np.abs(prob.u_star).max()),
    }
