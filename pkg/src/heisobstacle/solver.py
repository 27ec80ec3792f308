"""Discrete obstacle problem and its penalised companion.

Both problems minimise ``E(u) = energy(u) / p`` on the grid with Dirichlet
data pinned on the box faces.  :func:`solve_obstacle` adds the constraint
``u <= psi`` and uses projected gradient descent with a spectral
(Barzilai-Borwein) trial step and monotone Armijo backtracking.  In the
singular case (``eps = 0``, ``p < 2``) the descent works on the energy with
the same floor as its gradient.
:func:`solve_penalized` drops the constraint in favour of the smooth penalty
``sum F_eta(u) w`` and runs unconstrained descent; ``u <= psi`` is not
enforced there and has to come out of the minimisation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, cg

from .grid import Grid, sample
from .heisenberg import AnalyticFunction
from .operators import (
    EnergyParams,
    energy_and_gradient,
    obstacle_operator_bound,
    penalty_value_and_slope,
)

log = logging.getLogger(__name__)

HISTORY_CSV_HEADER = ["iter", "energy", "grad_norm", "step"]

ARMIJO_SHRINK = 0.5
ARMIJO_SIGMA = 1e-4
STEP_POLICIES = ("abb", "bb1", "bb2", "fixed")
# adaptive BB: short steps from the last few BB2 values when the two BB ratios disagree
ABB_MEMORY = 5
ABB_SWITCH = 0.8


class InfeasibleDatum(ValueError):
    """The boundary datum lies above the obstacle somewhere on the boundary."""


@dataclass
class ObstacleProblem:
    grid: Grid
    psi: np.ndarray
    u_star: np.ndarray
    params: EnergyParams
    psi_fn: AnalyticFunction | None = None
    u_star_fn: AnalyticFunction | None = None
    tol: float = 1e-8
    max_iter: int = 200_000
    step_policy: str = "abb"

    def __post_init__(self):
        g = self.grid
        self.psi = np.asarray(self.psi, dtype=float)
        self.u_star = np.asarray(self.u_star, dtype=float)
        for name in ("psi", "u_star"):
            arr = getattr(self, name)
            if arr.shape != g.shape:
                raise ValueError(f"{name} has shape {arr.shape}, grid is {g.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite values")
        bad = self.u_star[g.boundary] > self.psi[g.boundary]
        if bad.any():
            raise InfeasibleDatum(
                f"u_star exceeds psi at {int(bad.sum())} boundary node(s); the admissible set is empty")
        if self.step_policy not in STEP_POLICIES:
            raise ValueError(f"unknown step policy {self.step_policy!r}; expected one of {STEP_POLICIES}")
        if not self.tol > 0:
            raise ValueError("solver tolerance must be positive")

    @classmethod
    def from_presets(cls, grid: Grid, psi_fn: AnalyticFunction, u_star_fn: AnalyticFunction,
                     params: EnergyParams, **options) -> "ObstacleProblem":
        return cls(grid, sample(psi_fn, grid), sample(u_star_fn, grid), params,
                   psi_fn=psi_fn, u_star_fn=u_star_fn, **options)

    def with_params(self, params: EnergyParams) -> "ObstacleProblem":
        return ObstacleProblem(self.grid, self.psi, self.u_star, params, self.psi_fn,
                               self.u_star_fn, self.tol, self.max_iter, self.step_policy)

    @property
    def barrier(self) -> float:
        """``mu = -1 + min(min psi, min u_star)`` over the closed box."""
        return -1.0 + min(float(self.psi.min()), float(self.u_star.min()))

    @property
    def active_tol(self) -> float:
        return 1e-8 * (1.0 + float(np.abs(self.psi).max()))

    def penalty_weight(self) -> np.ndarray:
        """``h = (A psi)^+`` evaluated from the exact obstacle preset."""
        if self.psi_fn is None:
            raise ValueError("penalisation needs the obstacle as an analytic preset")
        return obstacle_operator_bound(self.psi_fn, self.grid, self.params)


@dataclass
class SolverResult:
    u: np.ndarray
    multiplier: np.ndarray
    energy_history: list[float] = field(default_factory=list)
    grad_norm_history: list[float] = field(default_factory=list)
    step_history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    active: np.ndarray | None = None
    kind: str = "obstacle"
    eta: float | None = None

    @property
    def final_grad_norm(self) -> float:
        return self.grad_norm_history[-1] if self.grad_norm_history else float("nan")


def write_history_csv(path: str | Path, result: SolverResult) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(HISTORY_CSV_HEADER)
            for k, (e, gn, st) in enumerate(zip(result.energy_history, result.grad_norm_history,
                                                 result.step_history)):
                wr.writerow([k, repr(e), repr(gn), repr(st)])
    except OSError as exc:
        raise OSError(f"could not write history CSV to {path}: {exc}") from exc
    return path


def harmonic_extension(grid: Grid, u_star: np.ndarray, maxiter: int = 2000) -> np.ndarray:
    """Interior values minimising the p = 2, eps = 1 energy with boundary data ``u_star``.

    Solved with conjugate gradients on the interior unknowns; only used to
    build a cheap starting point, so a loose tolerance is fine.
    """
    params = EnergyParams(2.0, 1.0)
    interior = grid.interior
    # work relative to the mean boundary value so constant data is reproduced exactly
    shift = float(np.mean(u_star[grid.boundary]))
    base = np.where(grid.boundary, u_star - shift, 0.0)
    _, g0 = energy_and_gradient(grid, base, params)
    n = int(interior.sum())

    def matvec(v):
        z = np.zeros(grid.shape)
        z[interior] = np.ravel(v)
        _, gz = energy_and_gradient(grid, z, params)
        return gz[interior]

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    rhs = -g0[interior]
    out = base.copy()
    if np.any(rhs):
        out[interior] = cg(op, rhs, rtol=1e-10, atol=0.0, maxiter=maxiter)[0]
    out += shift
    out[grid.boundary] = u_star[grid.boundary]
    return out


def _projected_grad(grad, u, psi, act_tol):
    pg = grad.copy()
    at_bound = psi - u <= act_tol
    # at the obstacle only steps that lower u are admissible
    pg[at_bound] = np.maximum(pg[at_bound], 0.0)
    return pg


def _next_step(policy, step, d, y_vec, recent):
    sy = float(np.vdot(d, y_vec))
    if policy == "fixed" or sy <= 0:
        return 2.0 * step
    bb1 = float(np.vdot(d, d)) / sy
    bb2 = sy / float(np.vdot(y_vec, y_vec))
    if policy == "bb1":
        return bb1
    if policy == "bb2":
        return bb2
    recent.append(bb2)
    del recent[:-ABB_MEMORY]
    return min(recent) if bb2 < ABB_SWITCH * bb1 else bb1


def _descend(fun, u, project, pgrad, tol, max_iter, step_policy, res):
    """Monotone Armijo descent along ``project(u - step * grad)``.

    ``fun`` returns ``(value, gradient)`` of a convex function; ``pgrad`` maps
    ``(grad, u)`` to the stationarity residual whose Euclidean norm is
    compared with ``tol``.  Appends to the histories of ``res`` and returns
    ``(u, grad, iterations)``.
    """
    e, grad = fun(u)
    gnorm = float(np.linalg.norm(pgrad(grad, u)))
    res.energy_history.append(e)
    res.grad_norm_history.append(gnorm)
    res.step_history.append(0.0)
    # first trial step moves the largest component by about 1e-2
    alpha = 1e-2 / max(float(np.abs(grad).max()), 1e-300)
    recent = []
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        step = alpha
        while True:
            trial = project(u - step * grad, u)
            d = trial - u
            e_new, grad_new = fun(trial)
            bar = ARMIJO_SIGMA * float(np.vdot(grad, d))
            # by convexity E(trial) - E(u) <= <grad E(trial), d>, which certifies
            # the decrease once it is lost to rounding in the energy values
            accepted = e_new <= e + bar or float(np.vdot(grad_new, d)) <= bar
            if accepted or step < 1e-30:
                break
            step *= ARMIJO_SHRINK
        if not accepted:
            log.debug("line search failed at iteration %d (residual %.3e)", it, gnorm)
            break
        y_vec = grad_new - grad
        u, e, grad = trial, e_new, grad_new
        gnorm = float(np.linalg.norm(pgrad(grad, u)))
        res.energy_history.append(e)
        res.grad_norm_history.append(gnorm)
        res.step_history.append(step)
        alpha = _next_step(step_policy, step, d, y_vec, recent)
    return u, grad, it


def solve_obstacle(prob: ObstacleProblem, u0: np.ndarray | None = None) -> SolverResult:
    """Minimise ``energy / p`` over ``{u <= psi, u = u_star on the boundary}``."""
    g, params, psi = prob.grid, prob.params, prob.psi
    bnd = g.boundary
    if u0 is None:
        u0 = harmonic_extension(g, prob.u_star)
    u = np.minimum(psi, u0)
    u[bnd] = prob.u_star[bnd]
    # numerical slack for deciding that a node sits on the obstacle
    bound_tol = 1e-13 * (1.0 + float(np.abs(psi).max()))

    def project(v, prev):
        v = np.minimum(v, psi)
        v[bnd] = prev[bnd]
        return v

    res = SolverResult(u, np.zeros(g.shape))
    u, grad, it = _descend(
        lambda v: energy_and_gradient(g, v, params, floored=True), u, project,
        lambda gr, v: _projected_grad(gr, v, psi, bound_tol),
        prob.tol, prob.max_iter, prob.step_policy, res)
    res.u = u
    res.iterations = it
    res.converged = res.final_grad_norm <= prob.tol
    mult = -grad
    mult[bnd] = 0.0
    res.multiplier = mult
    res.active = (psi - u <= prob.active_tol) & g.interior
    if not res.converged:
        log.warning("obstacle solve stopped after %d iterations, projected gradient %.3e > %.1e",
                    it, res.final_grad_norm, prob.tol)
    return res


def penalized_objective(prob: ObstacleProblem, eta: float, h: np.ndarray | None = None):
    """``u -> (E(u) + sum F_eta(u) w, gradient)`` over interior nodes."""
    g, params, psi = prob.grid, prob.params, prob.psi
    if h is None:
        h = prob.penalty_weight()
    w = g.cell_weight
    # boundary nodes carry no penalty
    h_in = np.where(g.interior, h, 0.0)

    def fun(u):
        e, grad = energy_and_gradient(g, u, params, floored=True)
        val, slope = penalty_value_and_slope(u, psi, h_in, eta)
        grad += w * slope
        grad[g.boundary] = 0.0
        return e + float(np.sum(val)) * w, grad

    return fun


def solve_penalized(prob: ObstacleProblem, eta: float, boundary: np.ndarray | None = None,
                    u0: np.ndarray | None = None, method: str = "gradient") -> SolverResult:
    """Unconstrained minimiser of the penalised energy.

    ``boundary`` holds the Dirichlet values (the trace of the obstacle
    solution); it defaults to ``prob.u_star``.  ``method`` is ``"gradient"``
    (Armijo gradient descent with the problem's step policy) or ``"lbfgs"``;
    an L-BFGS run that stalls above the tolerance is finished by gradient steps.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    g = prob.grid
    bnd = g.boundary
    data = prob.u_star if boundary is None else np.asarray(boundary, dtype=float)
    fun = penalized_objective(prob, eta)
    if u0 is None:
        u0 = harmonic_extension(g, data)
    u = np.array(u0, dtype=float)
    u[bnd] = data[bnd]
    res = SolverResult(u, np.zeros(g.shape), kind="penalized", eta=eta)
    if method not in ("gradient", "lbfgs"):
        raise ValueError(f"unknown penalised solve method {method!r}")

    def project(v, prev):
        v[bnd] = prev[bnd]
        return v

    it = 0
    if method == "lbfgs":
        u, grad, it = _lbfgs(fun, u, g.interior, prob, res)
    if method == "gradient" or res.final_grad_norm > prob.tol:
        # L-BFGS-B line searches give out near round-off; gradient steps finish the job
        u, grad, more = _descend(fun, u, project, lambda gr, v: gr, prob.tol,
                                 max(prob.max_iter - it, 1), prob.step_policy, res)
        it += more
    res.u = u
    res.iterations = it
    res.converged = res.final_grad_norm <= prob.tol
    # A(u) w at interior nodes equals the penalty slope at a stationary point
    e_only = energy_and_gradient(g, u, prob.params)[1]
    res.multiplier = -e_only
    res.active = (prob.psi - u <= prob.active_tol) & g.interior
    if not res.converged:
        log.warning("penalised solve stopped after %d iterations, gradient %.3e > %.1e",
                    it, res.final_grad_norm, prob.tol)
    return res


def _lbfgs(fun, u, inner, prob, res):
    template = u.copy()

    def wrapped(x):
        template[inner] = x
        e, grad = fun(template)
        return e, grad[inner]

    def record(xk):
        template[inner] = xk
        e, grad = fun(template)
        res.energy_history.append(e)
        res.grad_norm_history.append(float(np.linalg.norm(grad)))
        res.step_history.append(float("nan"))

    record(u[inner])
    out = minimize(wrapped, u[inner].copy(), jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": prob.max_iter, "gtol": 0.0, "ftol": 0.0, "maxcor": 20})
    template[inner] = out.x
    e, grad = fun(template)
    res.energy_history[-1] = e
    res.grad_norm_history[-1] = float(np.linalg.norm(grad))
    return template.copy(), grad, int(out.nit)


def vi_residual_check(result: SolverResult, prob: ObstacleProblem, trials: int = 20,
                      seed: int = 0) -> dict:
    """Probe the discrete variational inequality with random admissible fields.

    Each trial draws a field, clips it under the obstacle, pins the boundary
    data and records ``<grad E(u), v - u> / |v - u|``.  Directions with
    ``v = u`` are skipped.
    """
    g = prob.grid
    rng = np.random.default_rng(seed)
    grad = energy_and_gradient(g, result.u, prob.params)[1]
    worst = np.inf
    used = 0
    for _ in range(trials):
        scale = rng.choice([1e-3, 1e-1, 1.0])
        v = result.u + scale * rng.standard_normal(g.shape)
        v = np.minimum(v, prob.psi)
        v[g.boundary] = prob.u_star[g.boundary]
        d = v - result.u
        nd = float(np.linalg.norm(d))
        if nd == 0:
            continue
        used += 1
        worst = min(worst, float(np.vdot(grad, d)) / nd)
    bar = -10.0 * prob.tol
    return {"trials": used, "min_directional": worst if used else 0.0, "bar": bar,
            "passed": (worst >= bar) if used else True}
