"""Discrete horizontal calculus on a :class:`~heisobstacle.grid.Grid`.

The horizontal gradient uses forward differences at every support node::

    X u = D+x u + 2 y D+t u,     Y u = D+y u - 2 x D+t u

and the divergence is defined as its exact negative adjoint for the
``w``-weighted inner product, so summation by parts holds to round-off for
every ``u`` vanishing on the boundary.  The quasilinear operator is then
``A(u) = div_H(flux(u))`` and coincides with ``-energy_gradient(u) / w``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .heisenberg import AnalyticFunction

EPS_FLOOR = 1e-12
# distance (in lattice steps) from the faces below which A(u) is not reported
MEASURE_DEPTH = 2


@dataclass(frozen=True)
class EnergyParams:
    p: float
    eps: float = 0.0

    def __post_init__(self):
        if not (self.p > 1 and np.isfinite(self.p)):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if not (self.eps >= 0 and np.isfinite(self.eps)):
            raise ValueError(f"eps must be finite and >= 0, got {self.eps}")

    @property
    def singular(self) -> bool:
        return self.eps == 0 and self.p < 2

    @property
    def flux_eps(self) -> float:
        """Regularisation used inside the (p/2 - 1) power."""
        return EPS_FLOOR if self.singular else self.eps


def measured_mask(g: Grid) -> np.ndarray:
    return g.inner_mask(MEASURE_DEPTH)


def _support_xy(g: Grid):
    ax, ay, _ = g.axes
    return ax[:-1, None, None], ay[None, :-1, None]


def horizontal_gradient(g: Grid, u: np.ndarray):
    hx, hy, ht = g.spacing
    u0 = u[:-1, :-1, :-1]
    dx = (u[1:, :-1, :-1] - u0) / hx
    dy = (u[:-1, 1:, :-1] - u0) / hy
    dt = (u[:-1, :-1, 1:] - u0) / ht
    xs, ys = _support_xy(g)
    return dx + 2.0 * ys * dt, dy - 2.0 * xs * dt


def _gradient_transpose(g: Grid, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """``G^T F`` for the (unweighted) forward-difference gradient ``G``."""
    hx, hy, ht = g.spacing
    xs, ys = _support_xy(g)
    ax = fx / hx
    ay = fy / hy
    at = (2.0 * ys * fx - 2.0 * xs * fy) / ht
    out = np.zeros(g.shape)
    out[:-1, :-1, :-1] -= ax + ay + at
    out[1:, :-1, :-1] += ax
    out[:-1, 1:, :-1] += ay
    out[:-1, :-1, 1:] += at
    return out


def horizontal_divergence(g: Grid, F) -> np.ndarray:
    """Negative adjoint of :func:`horizontal_gradient`; zero on boundary nodes."""
    div = -_gradient_transpose(g, F[0], F[1])
    div[g.boundary] = 0.0
    return div


def _flux_factor(s: np.ndarray, params: EnergyParams) -> np.ndarray:
    e = 0.5 * params.p - 1.0
    if e == 0.0:
        return np.ones_like(s)
    return (params.flux_eps + s) ** e


def flux(g: Grid, u: np.ndarray, params: EnergyParams):
    gx, gy = horizontal_gradient(g, u)
    phi = _flux_factor(gx * gx + gy * gy, params)
    return phi * gx, phi * gy


def energy(g: Grid, u: np.ndarray, params: EnergyParams, region: np.ndarray | None = None) -> float:
    """``sum (eps + |grad_H u|^2)^(p/2) w`` over support nodes in ``region``."""
    gx, gy = horizontal_gradient(g, u)
    dens = (params.eps + gx * gx + gy * gy) ** (0.5 * params.p)
    if region is not None:
        dens = dens[region[:-1, :-1, :-1]]
    return float(np.sum(dens) * g.cell_weight)


def energy_and_gradient(g: Grid, u: np.ndarray, params: EnergyParams, floored: bool = False):
    """``(E, dE/du)`` for ``E = energy / p``; boundary entries of the gradient are zero.

    With ``floored`` the value uses the same regularisation as the gradient
    (``flux_eps``), so the pair is exactly a function and its gradient also
    in the singular case.
    """
    gx, gy = horizontal_gradient(g, u)
    s = gx * gx + gy * gy
    w = g.cell_weight
    e_reg = params.flux_eps if floored else params.eps
    e = float(np.sum((e_reg + s) ** (0.5 * params.p)) * w / params.p)
    phi = _flux_factor(s, params)
    grad = _gradient_transpose(g, phi * gx, phi * gy)
    grad *= w
    grad[g.boundary] = 0.0
    return e, grad


def energy_gradient(g: Grid, u: np.ndarray, params: EnergyParams) -> np.ndarray:
    return energy_and_gradient(g, u, params)[1]


def operator_A(g: Grid, u: np.ndarray, params: EnergyParams) -> np.ndarray:
    """Discrete ``div_H((eps + |grad_H u|^2)^(p/2-1) grad_H u)``, zero on the boundary."""
    return horizontal_divergence(g, flux(g, u, params))


def truncation_H(tval, eta: float):
    """0 below 0, linear ramp ``t / eta`` on (0, eta), 1 from ``eta`` on."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    out = np.clip(np.asarray(tval, dtype=float) / eta, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _ramp_antiderivative(sig, psi, eta):
    # integral of clip((s - psi + eta) / eta, 0, 1) from -inf to sig
    lo = psi - eta
    return np.where(sig <= lo, 0.0,
                    np.where(sig < psi, (sig - lo) ** 2 / (2.0 * eta), 0.5 * eta + (sig - psi)))


def penalty_value_and_slope(r, psi, h, eta: float):
    """``F_eta(r) = int_0^r h (1 - H_eta(psi - s)) ds`` and its r-derivative.

    Vectorised over ``r``, ``psi`` and ``h``.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    r, psi, h = (np.asarray(v, dtype=float) for v in (r, psi, h))
    slope = h * np.clip((r - psi + eta) / eta, 0.0, 1.0)
    value = h * (_ramp_antiderivative(r, psi, eta) - _ramp_antiderivative(0.0, psi, eta))
    if value.ndim == 0:
        return float(value), float(slope)
    return value, slope


def obstacle_operator_bound(psi: AnalyticFunction, g: Grid, params: EnergyParams) -> np.ndarray:
    """Positive part of the exact continuum operator of the obstacle at every node."""
    vals = psi.operator_value(*g.coords, params.flux_eps, params.p)
    return np.maximum(vals, 0.0)


def discrete_obstacle_operator(psi: AnalyticFunction, g: Grid, params: EnergyParams) -> np.ndarray:
    """The discrete alternative to :func:`obstacle_operator_bound` (not clipped)."""
    return operator_A(g, psi.value(*g.coords), params)
