"""Convergence of the regularised obstacle solutions as ``eps -> 0``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..grid import ball_average, fk_ball_mask, horizontal_magnitude, lp_norm_p
from ..heisenberg import ORIGIN, homogeneous_dimension
from ..operators import EnergyParams, horizontal_gradient, measured_mask
from ..solver import ObstacleProblem, SolverResult, solve_obstacle

log = logging.getLogger(__name__)

RATE_CSV_HEADER = ["eps", "value", "implied_constant", "fitted", "iterations"]
MONOTONE_SLACK = 0.05
MIN_DECADES = 3.0


class SweepAborted(RuntimeError):
    """One of the solves in an eps sweep did not converge."""


def theoretical_exponent(p: float) -> float:
    """``(p/2)^2`` for ``p <= 2`` and ``1`` for ``p >= 2``."""
    return (0.5 * p) ** 2 if p <= 2 else 1.0


def prefactor_power(p: float) -> float:
    return 1.0 - 0.5 * p if p <= 2 else 1.0 - 1.0 / p


@dataclass
class RateReport:
    p: float
    eps: list[float]
    values: list[float]
    R: float
    noise_floor: float
    slope: float
    exponent: float
    fitted_constant: float
    prefactor: float
    implied_constants: list[float]
    fitted_mask: list[bool]
    monotone: bool
    iterations: list[int] = field(default_factory=list)

    @property
    def max_value(self) -> float:
        return max(self.values)

    def rows(self) -> list[list]:
        return [[e, v, c, int(f), it] for e, v, c, f, it in
                zip(self.eps, self.values, self.implied_constants, self.fitted_mask,
                    self.iterations)]


def validate_eps_list(eps_list) -> list[float]:
    eps = [float(e) for e in eps_list]
    if len(eps) < 2:
        raise ValueError("an eps sweep needs at least two values")
    if any(not (e > 0 and np.isfinite(e)) for e in eps):
        raise ValueError(f"eps values must be positive and finite, got {eps}")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError(f"eps list must be strictly decreasing, got {eps}")
    if np.log10(eps[0] / eps[-1]) < MIN_DECADES - 1e-9:
        raise ValueError(f"eps list must span at least {MIN_DECADES:g} decades, got {eps}")
    return eps


def fit_loglog(x, y) -> tuple[float, float]:
    """Least-squares ``log y = slope log x + log c``; returns ``(slope, c)``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, icpt = np.polyfit(lx, ly, 1)
    return float(slope), float(np.exp(icpt))


def _solve(prob, u0, what):
    res = solve_obstacle(prob, u0=u0)
    if not res.converged:
        raise SweepAborted(f"{what} did not converge: residual {res.final_grad_norm:.3e} "
                           f"after {res.iterations} iterations")
    return res


def eps_sweep(template: ObstacleProblem, eps_list, R: float,
              reference: SolverResult | None = None) -> RateReport:
    """Measure ``int_{B_R} |grad_H u_0 - grad_H u_eps|^p`` along a decreasing eps list.

    The regularised problems are solved in the given order, each started from
    the previous solution; the ``eps = 0`` reference is solved last, started
    from the smallest ``eps``, unless it is passed in.  All problems share the
    grid and boundary datum of ``template``; only ``eps`` changes.
    """
    eps = validate_eps_list(eps_list)
    g = template.grid
    p = template.params.p
    ball = fk_ball_mask(g, ORIGIN, R)
    if not ball.any():
        raise ValueError(f"the ball of radius {R} contains no grid node")
    if np.any(ball & ~measured_mask(g)):
        raise ValueError(f"the ball of radius {R} reaches into the unmeasured boundary layer")

    sols, u0 = [], None
    for e in eps:
        res = _solve(template.with_params(EnergyParams(p, e)), u0, f"eps={e:g} solve")
        log.info("eps=%g solved in %d iterations", e, res.iterations)
        sols.append(res)
        u0 = res.u
    if reference is None:
        reference = _solve(template.with_params(EnergyParams(p, 0.0)), u0, "eps=0 reference solve")
    elif not reference.converged:
        raise SweepAborted("the supplied eps=0 reference is not converged")

    gx0, gy0 = horizontal_gradient(g, reference.u)
    values = []
    for res in sols:
        gx, gy = horizontal_gradient(g, res.u)
        values.append(lp_norm_p(g, (gx0 - gx, gy0 - gy), p, ball))

    noise = 10.0 * template.tol
    fitted = [v > noise for v in values]
    expo = theoretical_exponent(p)
    if sum(fitted) >= 2:
        slope, const = fit_loglog([e for e, f in zip(eps, fitted) if f],
                                  [v for v, f in zip(values, fitted) if f])
    else:
        slope, const = float("nan"), float("nan")

    mag = np.zeros(g.shape)
    mag[:-1, :-1, :-1] = horizontal_magnitude((gx0, gy0)) ** p
    avg = ball_average(g, mag, ball)
    pref = (1.0 + avg) ** prefactor_power(p)
    scale = R ** homogeneous_dimension(1)
    implied = [v / (pref * e ** expo * scale) for e, v in zip(eps, values)]
    monotone = all(b <= a * (1 + MONOTONE_SLACK) or b <= noise for a, b in zip(values, values[1:]))
    return RateReport(p=p, eps=eps, values=values, R=float(R), noise_floor=noise, slope=slope,
                      exponent=expo, fitted_constant=const, prefactor=pref,
                      implied_constants=implied, fitted_mask=fitted, monotone=monotone,
                      iterations=[r.iterations for r in sols])
