"""Uniform node-centred lattice over a box in R^3.

Scalar fields are plain ``float`` arrays of shape ``grid.shape`` indexed
``[ix, iy, it]``.  Horizontal fields are ``(X, Y)`` pairs of arrays on the
forward-difference support, i.e. every node except the last layer along each
axis, shape ``grid.support_shape``.  Masks are boolean node arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .heisenberg import ORIGIN, AnalyticFunction, Point, fk_norm_array, left_translate_offset

FIELD_CSV_HEADER = "ix,iy,it,x,y,t,value"


@dataclass(frozen=True)
class Grid:
    lower: Point
    upper: Point
    resolution: tuple[int, int, int]

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolution)
        if len(res) != 3:
            raise ValueError(f"resolution must have three entries, got {self.resolution!r}")
        if min(res) < 3:
            raise ValueError(f"every axis needs at least 3 nodes, got {res}")
        lo, hi = self.lower.as_tuple(), self.upper.as_tuple()
        for name, a, b in zip("xyt", lo, hi):
            if np.ndim(a) != 0 or np.ndim(b) != 0:
                raise ValueError("grids are only built over H^1 (scalar x, y)")
            if not float(b) > float(a):
                raise ValueError(f"degenerate box along {name}: [{a}, {b}]")
        object.__setattr__(self, "resolution", res)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.resolution

    @property
    def support_shape(self) -> tuple[int, int, int]:
        return tuple(n - 1 for n in self.resolution)

    @property
    def size(self) -> int:
        nx, ny, nt = self.resolution
        return nx * ny * nt

    @cached_property
    def spacing(self) -> tuple[float, float, float]:
        lo, hi = self.lower.as_tuple(), self.upper.as_tuple()
        return tuple((float(b) - float(a)) / (n - 1) for a, b, n in zip(lo, hi, self.resolution))

    @property
    def cell_weight(self) -> float:
        hx, hy, ht = self.spacing
        return hx * hy * ht

    @cached_property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo = self.lower.as_tuple()
        return tuple(float(a) + h * np.arange(n) for a, h, n in zip(lo, self.spacing, self.resolution))

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def boundary(self) -> np.ndarray:
        b = np.zeros(self.shape, dtype=bool)
        b[[0, -1], :, :] = True
        b[:, [0, -1], :] = True
        b[:, :, [0, -1]] = True
        return b

    @cached_property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    def inner_mask(self, depth: int) -> np.ndarray:
        """Nodes at least ``depth`` lattice steps away from every face."""
        m = np.zeros(self.shape, dtype=bool)
        if all(n > 2 * depth for n in self.resolution):
            m[depth:-depth, depth:-depth, depth:-depth] = True
        return m

    def coord_of(self, index: tuple[int, int, int]) -> Point:
        ix, iy, it = index
        for i, n in zip(index, self.resolution):
            if not 0 <= i < n:
                raise IndexError(f"node index {index} outside grid {self.resolution}")
        ax = self.axes
        return Point(float(ax[0][ix]), float(ax[1][iy]), float(ax[2][it]))

    def index_of(self, p: Point) -> tuple[int, int, int]:
        """Nearest node index; exact inverse of :meth:`coord_of` on nodes."""
        out = []
        for c, a, h, n in zip(p.as_tuple(), self.lower.as_tuple(), self.spacing, self.resolution):
            i = int(round((float(c) - float(a)) / h))
            if not 0 <= i < n:
                raise IndexError(f"{p} lies outside the grid box")
            out.append(i)
        return tuple(out)


def build_grid(box: tuple[Point, Point], resolution: tuple[int, int, int]) -> Grid:
    lower, upper = box
    return Grid(lower, upper, tuple(resolution))


def cube_grid(half_width: float, n: int) -> Grid:
    """``[-a, a]^3`` with ``n`` nodes per axis."""
    a = float(half_width)
    return Grid(Point(-a, -a, -a), Point(a, a, a), (n, n, n))


def sample(f: AnalyticFunction, g: Grid) -> np.ndarray:
    return f.value(*g.coords)


def fk_ball_mask(g: Grid, center: Point = ORIGIN, R: float = 1.0) -> np.ndarray:
    if not R > 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    dx, dy, dt = left_translate_offset(center, *g.coords)
    return fk_norm_array(dx, dy, dt) < R


def _support_mask(g: Grid, mask: np.ndarray) -> np.ndarray:
    return mask[:-1, :-1, :-1]


def horizontal_magnitude(F) -> np.ndarray:
    fx, fy = F
    return np.sqrt(fx * fx + fy * fy)


def lp_norm_p(g: Grid, f, p: float, mask: np.ndarray | None = None) -> float:
    """``sum_mask |f|^p w``: the p-th power of the discrete L^p norm.

    ``f`` is a scalar node field or a horizontal ``(X, Y)`` pair, in which
    case the Euclidean magnitude is used and the mask is restricted to the
    gradient support.
    """
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    if isinstance(f, tuple):
        vals = horizontal_magnitude(f)
        m = None if mask is None else _support_mask(g, mask)
    else:
        vals = np.abs(np.asarray(f, dtype=float))
        m = mask
    if m is not None:
        if not m.any():
            return 0.0
        vals = vals[m]
    return float(np.sum(vals ** p) * g.cell_weight)


def ball_average(g: Grid, f: np.ndarray, mask: np.ndarray) -> float:
    count = int(np.count_nonzero(mask))
    if count == 0:
        raise ValueError("cannot average over an empty mask")
    w = g.cell_weight
    return float(np.sum(f[mask]) * w / (count * w))


def write_field_csv(path: str | Path, g: Grid, values: np.ndarray) -> Path:
    """Write a node field as CSV, rows ordered with ``ix`` fastest."""
    path = Path(path)
    values = np.asarray(values, dtype=float)
    if values.shape != g.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {g.shape}")
    ix, iy, it = np.meshgrid(*(np.arange(n) for n in g.shape), indexing="ij")
    x, y, t = g.coords
    # transpose to (it, iy, ix) so that ravel() walks ix fastest
    cols = [a.transpose(2, 1, 0).ravel() for a in (ix, iy, it, x, y, t, values)]
    table = np.column_stack(cols)
    try:
        with open(path, "w", newline="") as fh:
            np.savetxt(fh, table, delimiter=",", header=FIELD_CSV_HEADER, comments="",
                       fmt=["%d", "%d", "%d", "%.17g", "%.17g", "%.17g", "%.17g"])
    except OSError as exc:
        raise OSError(f"could not write field CSV to {path}: {exc}") from exc
    return path


def read_field_csv(path: str | Path, g: Grid) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = np.empty(g.shape)
    idx = data[:, :3].astype(int)
    out[idx[:, 0], idx[:, 1], idx[:, 2]] = data[:, 6]
    return out
