"""Continuum geometry of the Heisenberg group and analytic test functions.

Points are written ``(x, y, t)`` with ``x, y`` in R^n and ``t`` real.  The
group law is

    (x1, y1, t1) o (x2, y2, t2) = (x1 + x2, y1 + y2, t1 + t2 + 2 (x2.y1 - x1.y2))

and the left-invariant horizontal fields are ``X = d/dx + 2y d/dt`` and
``Y = d/dy - 2x d/dt``.

The presets in :class:`AnalyticFunction` carry hand-derived first and second
horizontal derivatives (n = 1), so the quasilinear operator

    A_eps f = div_H((eps + |grad_H f|^2)^(p/2 - 1) grad_H f)

can be evaluated exactly on an obstacle without any discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


@dataclass(frozen=True)
class Point:
    """A point of H^n.  ``x`` and ``y`` are floats (n = 1) or length-n arrays."""

    x: float | np.ndarray
    y: float | np.ndarray
    t: float

    def __post_init__(self):
        vals = np.concatenate([np.ravel(self.x), np.ravel(self.y), [self.t]])
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite coordinate in {self!r}")
        if np.shape(self.x) != np.shape(self.y):
            raise ValueError("x and y must have the same dimension")

    def as_tuple(self):
        return (self.x, self.y, self.t)


ORIGIN = Point(0.0, 0.0, 0.0)


def _dot(a, b):
    return float(np.dot(np.ravel(a), np.ravel(b)))


def group_mul(p1: Point, p2: Point) -> Point:
    """Group product ``p1 o p2``."""
    t = p1.t + p2.t + 2.0 * (_dot(p2.x, p1.y) - _dot(p1.x, p2.y))
    return Point(_add(p1.x, p2.x), _add(p1.y, p2.y), t)


def group_inv(p: Point) -> Point:
    return Point(_neg(p.x), _neg(p.y), -p.t)


def _add(a, b):
    if np.ndim(a) == 0:
        return float(a) + float(b)
    return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)


def _neg(a):
    if np.ndim(a) == 0:
        return -float(a)
    return -np.asarray(a, dtype=float)


def fk_norm(p: Point) -> float:
    """Folland-Koranyi gauge ``(|z|^4 + t^2)^(1/4)`` with ``z = (x, y)``."""
    z2 = _dot(p.x, p.x) + _dot(p.y, p.y)
    return (z2 * z2 + p.t * p.t) ** 0.25


def homogeneous_dimension(n: int = 1) -> int:
    """``Q = 2n + 2``: balls of radius ``r`` in H^n have volume proportional to ``r^Q``."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return 2 * n + 2


def dilate(p: Point, lam: float) -> Point:
    """Anisotropic dilation ``(lam x, lam y, lam^2 t)``."""
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    if np.ndim(p.x) == 0:
        return Point(lam * p.x, lam * p.y, lam * lam * p.t)
    return Point(lam * np.asarray(p.x), lam * np.asarray(p.y), lam * lam * p.t)


def fk_norm_array(x, y, t):
    """Vectorised gauge for n = 1 coordinate arrays."""
    z2 = x * x + y * y
    return np.sqrt(np.sqrt(z2 * z2 + t * t))


def left_translate_offset(center: Point, x, y, t):
    """Coordinates of ``center^{-1} o (x, y, t)`` for n = 1 arrays."""
    cx, cy, ct = float(center.x), float(center.y), float(center.t)
    # center^{-1} = (-cx, -cy, -ct)
    return x - cx, y - cy, t - ct + 2.0 * (x * (-cy) - (-cx) * y)


class Preset(str, Enum):
    CONSTANT = "constant"
    COORD_X = "coordinate-x"
    COORD_T = "coordinate-t"
    HORIZONTAL_PARABOLOID = "horizontal-paraboloid"
    FULL_PARABOLOID = "full-paraboloid"
    VALLEY = "valley"


# number of parameters expected by each preset
_N_PARAMS = {
    Preset.CONSTANT: 1,
    Preset.COORD_X: 0,
    Preset.COORD_T: 0,
    Preset.HORIZONTAL_PARABOLOID: 2,
    Preset.FULL_PARABOLOID: 2,
    Preset.VALLEY: 2,
}


@dataclass(frozen=True)
class AnalyticFunction:
    """A preset smooth function on H^1 with closed-form horizontal derivatives.

    Presets and parameters:

    ============================  ==========  ==========================
    id                            params      formula
    ============================  ==========  ==========================
    ``constant``                  (c,)        c
    ``coordinate-x``              ()          x
    ``coordinate-t``              ()          t
    ``horizontal-paraboloid``     (a, b)      a + b (x^2 + y^2)
    ``full-paraboloid``           (a, b)      a + b (x^2 + y^2 + t^2)
    ``valley``                    (a, b)      -a + b (x^2 + y^2 + t^2)
    ============================  ==========  ==========================
    """

    id: Preset
    params: tuple[float, ...] = ()

    def __post_init__(self):
        try:
            pid = Preset(self.id)
        except ValueError:
            raise ValueError(f"unknown preset id {self.id!r}") from None
        object.__setattr__(self, "id", pid)
        params = tuple(float(v) for v in self.params)
        if len(params) != _N_PARAMS[pid]:
            raise ValueError(
                f"preset {pid.value!r} takes {_N_PARAMS[pid]} parameter(s), got {len(params)}")
        if not all(math.isfinite(v) for v in params):
            raise ValueError(f"non-finite parameter for preset {pid.value!r}")
        object.__setattr__(self, "params", params)

    def describe(self) -> str:
        if not self.params:
            return self.id.value
        return f"{self.id.value}({', '.join(repr(v) for v in self.params)})"

    # -- pointwise / vectorised evaluation (n = 1) ------------------------

    def value(self, x, y, t):
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        pid, par = self.id, self.params
        if pid is Preset.CONSTANT:
            return np.full(x.shape, par[0])
        if pid is Preset.COORD_X:
            return x.copy()
        if pid is Preset.COORD_T:
            return t.copy()
        if pid is Preset.HORIZONTAL_PARABOLOID:
            return par[0] + par[1] * (x * x + y * y)
        if pid is Preset.FULL_PARABOLOID:
            return par[0] + par[1] * (x * x + y * y + t * t)
        if pid is Preset.VALLEY:
            return -par[0] + par[1] * (x * x + y * y + t * t)
        raise AssertionError(pid)

    def partials(self, x, y, t):
        """Euclidean partials ``(f_x, f_y, f_t)``."""
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        zero = np.zeros(x.shape)
        pid, par = self.id, self.params
        if pid is Preset.CONSTANT:
            return zero, zero.copy(), zero.copy()
        if pid is Preset.COORD_X:
            return np.ones(x.shape), zero, zero.copy()
        if pid is Preset.COORD_T:
            return zero, zero.copy(), np.ones(x.shape)
        b = par[1]
        if pid is Preset.HORIZONTAL_PARABOLOID:
            return 2 * b * x, 2 * b * y, zero
        return 2 * b * x, 2 * b * y, 2 * b * t

    def horizontal_jets(self, x, y, t):
        """First and second horizontal derivatives.

        Returns ``(Xf, Yf, XXf, XYf, YXf, YYf)`` where ``XYf`` means ``X(Yf)``.
        """
        x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
        zero = np.zeros(x.shape)
        pid, par = self.id, self.params
        if pid is Preset.CONSTANT:
            return (zero,) * 6
        if pid is Preset.COORD_X:
            return (np.ones(x.shape),) + (zero,) * 5
        if pid is Preset.COORD_T:
            # X t = 2y, Y t = -2x
            return 2 * y, -2 * x, zero, np.full(x.shape, -2.0), np.full(x.shape, 2.0), zero
        b = par[1]
        if pid is Preset.HORIZONTAL_PARABOLOID:
            c = np.full(x.shape, 2 * b)
            return 2 * b * x, 2 * b * y, c, zero, zero.copy(), c.copy()
        # b (x^2 + y^2 + t^2): Xf = 2b (x + 2yt), Yf = 2b (y - 2xt)
        xf = 2 * b * (x + 2 * y * t)
        yf = 2 * b * (y - 2 * x * t)
        xx = 2 * b * (1 + 4 * y * y)
        xy = 2 * b * (-2 * t - 4 * x * y)
        yx = 2 * b * (2 * t - 4 * x * y)
        yy = 2 * b * (1 + 4 * x * x)
        return xf, yf, xx, xy, yx, yy

    def horizontal_gradient(self, x, y, t):
        jets = self.horizontal_jets(x, y, t)
        return jets[0], jets[1]

    def operator_value(self, x, y, t, eps: float, p: float):
        """Exact ``div_H((eps + |grad_H f|^2)^(p/2-1) grad_H f)``.

        Where ``eps = 0`` and the horizontal gradient vanishes the value is the
        limit along the preset: 0 for p > 2, the sub-Laplacian for p = 2, and
        ``+inf`` (times the sign of the sub-Laplacian) for p < 2.
        """
        xf, yf, xx, xy, yx, yy = self.horizontal_jets(x, y, t)
        s = xf * xf + yf * yf
        lap = xx + yy
        # X(s) Xf + Y(s) Yf with X(s) = 2 (Xf XXf + Yf XYf)
        drift = 2 * (xf * xx + yf * xy) * xf + 2 * (xf * yx + yf * yy) * yf
        e = 0.5 * p - 1.0
        base = eps + s
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(base > 0, np.power(np.where(base > 0, base, 1.0), e), 0.0)
            dphi = np.where(base > 0, e * np.power(np.where(base > 0, base, 1.0), e - 1.0), 0.0)
            out = phi * lap + dphi * drift
        if eps == 0:
            degenerate = s == 0
            if np.any(degenerate):
                if p > 2:
                    lim = np.zeros_like(lap)
                elif p == 2:
                    lim = lap
                else:
                    lim = np.where(lap > 0, np.inf, np.where(lap < 0, -np.inf, 0.0))
                out = np.where(degenerate, lim, out)
        return out


def evaluate(f: AnalyticFunction, p: Point) -> float:
    """Exact value of a preset at a point of H^1."""
    return float(f.value(p.x, p.y, p.t))


def exact_horizontal_data(f: AnalyticFunction, p: Point, eps: float = 0.0, pexp: float = 2.0):
    """``((Xf, Yf), A_eps f)`` at ``p``, both in closed form."""
    xf, yf = f.horizontal_gradient(p.x, p.y, p.t)
    a = f.operator_value(p.x, p.y, p.t, eps, pexp)
    return (float(xf), float(yf)), float(a)


def commutator_value(f: AnalyticFunction, p: Point) -> float:
    """``(XY - YX) f`` at ``p`` from the exact second derivatives."""
    jets = f.horizontal_jets(p.x, p.y, p.t)
    return float(jets[3] - jets[4])
