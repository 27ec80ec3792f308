"""Refinement study of the discrete operator against exact preset values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import cube_grid, sample
from ..heisenberg import AnalyticFunction
from ..operators import EnergyParams, measured_mask, operator_A
from .rates import fit_loglog

CONSISTENCY_CSV_HEADER = ["preset", "p", "n", "h", "max_error"]
DEFAULT_RESOLUTIONS = (17, 33, 65)
MIN_SLOPE = 0.9
# errors this small relative to the exact values count as reproduction, not discretisation error
EXACT_REL = 1e-10


@dataclass(frozen=True)
class ConsistencyReport:
    preset: str
    p: float
    resolutions: tuple[int, ...]
    spacings: tuple[float, ...]
    errors: tuple[float, ...]
    scale: float
    slope: float

    @property
    def exact(self) -> bool:
        """The operator is reproduced to round-off at every resolution."""
        return all(e <= EXACT_REL * (1.0 + self.scale) for e in self.errors)

    @property
    def passed(self) -> bool:
        # a scheme that is exact on the preset has no error left to decay
        return self.exact or (np.isfinite(self.slope) and self.slope >= MIN_SLOPE)

    def rows(self) -> list[list]:
        return [[self.preset, self.p, n, h, e] for n, h, e in
                zip(self.resolutions, self.spacings, self.errors)]


def operator_error(f: AnalyticFunction, n: int, p: float, eps: float = 0.0,
                   half_width: float = 1.0) -> tuple[float, float, float]:
    """``(h, max error, max |exact|)`` of ``A`` over the measured nodes of ``[-a, a]^3``."""
    g = cube_grid(half_width, n)
    params = EnergyParams(p, eps)
    m = measured_mask(g)
    A = operator_A(g, sample(f, g), params)
    exact = f.operator_value(*g.coords, params.flux_eps, p)
    return g.spacing[0], float(np.abs(A - exact)[m].max()), float(np.abs(exact[m]).max())


def consistency_study(f: AnalyticFunction, p: float, resolutions=DEFAULT_RESOLUTIONS,
                      eps: float = 0.0, half_width: float = 1.0) -> ConsistencyReport:
    res = tuple(int(n) for n in resolutions)
    if len(res) < 2:
        raise ValueError("a refinement study needs at least two resolutions")
    hs, errs, scale = [], [], 0.0
    for n in res:
        h, e, s = operator_error(f, n, p, eps, half_width)
        hs.append(h)
        errs.append(e)
        scale = max(scale, s)
    if all(e > 0 for e in errs):
        slope, _ = fit_loglog(hs, errs)
    else:
        slope = float("nan")
    return ConsistencyReport(f.describe(), float(p), res, tuple(hs), tuple(errs), scale, slope)


def zero_operator_check(f: AnalyticFunction, n: int = 33, p: float = 2.0,
                        half_width: float = 1.0) -> float:
    """Largest ``|A(f)|`` over all interior nodes."""
    g = cube_grid(half_width, n)
    A = operator_A(g, sample(f, g), EnergyParams(p, 0.0))
    return float(np.abs(A[g.interior]).max())
