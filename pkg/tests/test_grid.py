import numpy as np
import pytest

from heisobstacle.grid import (Grid, ball_average, build_grid, cube_grid, fk_ball_mask,
                               horizontal_magnitude, lp_norm_p, read_field_csv, sample,
                               write_field_csv)
from heisobstacle.heisenberg import ORIGIN, AnalyticFunction, Point


def test_spacing_and_weight():
    g = build_grid((Point(-1.0, 0.0, -2.0), Point(1.0, 1.0, 2.0)), (5, 3, 9))
    assert g.spacing == (0.5, 0.5, 0.5)
    assert g.cell_weight == 0.125
    assert g.size == 135
    assert g.support_shape == (4, 2, 8)


def test_boundary_and_inner_masks():
    g = cube_grid(1.0, 7)
    assert g.boundary.sum() == 7 ** 3 - 5 ** 3
    assert g.inner_mask(2).sum() == 3 ** 3
    assert not g.inner_mask(4).any()
    assert np.array_equal(g.interior, ~g.boundary)


@pytest.mark.parametrize("res", [(2, 5, 5), (5, 5)])
def test_bad_resolution(res):
    with pytest.raises(ValueError):
        Grid(Point(0.0, 0.0, 0.0), Point(1.0, 1.0, 1.0), res)


def test_degenerate_box():
    with pytest.raises(ValueError, match="along y"):
        Grid(Point(0.0, 1.0, 0.0), Point(1.0, 1.0, 1.0), (3, 3, 3))


def test_index_coord_roundtrip():
    g = cube_grid(1.0, 9)
    for idx in [(0, 0, 0), (8, 3, 5), (4, 4, 4)]:
        assert g.index_of(g.coord_of(idx)) == idx
    with pytest.raises(IndexError):
        g.coord_of((9, 0, 0))
    with pytest.raises(IndexError):
        g.index_of(Point(2.0, 0.0, 0.0))


def test_fk_ball_mask():
    g = cube_grid(1.0, 9)
    m = fk_ball_mask(g, ORIGIN, 0.5)
    x, y, t = g.coords
    assert np.array_equal(m, (x ** 2 + y ** 2) ** 2 + t ** 2 < 0.5 ** 4)
    with pytest.raises(ValueError):
        fk_ball_mask(g, ORIGIN, 0.0)


def test_lp_norm_and_average():
    g = cube_grid(1.0, 5)
    ones = np.ones(g.shape)
    assert lp_norm_p(g, ones, 2.0) == pytest.approx(125 * g.cell_weight)
    F = (3 * np.ones(g.support_shape), 4 * np.ones(g.support_shape))
    assert lp_norm_p(g, F, 1.0) == pytest.approx(5 * 64 * g.cell_weight)
    assert np.all(horizontal_magnitude(F) == 5.0)
    assert lp_norm_p(g, ones, 1.0, np.zeros(g.shape, bool)) == 0.0
    assert ball_average(g, 2 * ones, g.interior) == 2.0
    with pytest.raises(ValueError):
        ball_average(g, ones, np.zeros(g.shape, bool))
    with pytest.raises(ValueError):
        lp_norm_p(g, ones, 0.5)


def test_field_csv_roundtrip(tmp_path):
    g = build_grid((Point(-1.0, -1.0, 0.0), Point(1.0, 1.0, 1.0)), (4, 3, 5))
    u = sample(AnalyticFunction("valley", (0.5, 2.0)), g) + 1e-13
    path = write_field_csv(tmp_path / "u.csv", g, u)
    lines = path.read_text().splitlines()
    assert lines[0] == "ix,iy,it,x,y,t,value"
    assert lines[1].startswith("0,0,0,") and lines[2].startswith("1,0,0,")
    assert np.array_equal(read_field_csv(path, g), u)
    with pytest.raises(ValueError):
        write_field_csv(tmp_path / "bad.csv", g, np.zeros((2, 2, 2)))
