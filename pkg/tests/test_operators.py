import numpy as np
import pytest
from scipy.integrate import quad

from heisobstacle.grid import cube_grid, sample
from heisobstacle.heisenberg import AnalyticFunction
from heisobstacle.operators import (EPS_FLOOR, EnergyParams, discrete_obstacle_operator, energy,
                                    energy_and_gradient, energy_gradient, flux,
                                    horizontal_divergence, horizontal_gradient, measured_mask,
                                    obstacle_operator_bound, operator_A, penalty_value_and_slope,
                                    truncation_H)


def local_fd(g, u, params, i, h=1e-4):
    """Fourth-order difference of the energy of the cells touching node ``i``."""
    idx = np.unravel_index(i, g.shape)
    region = np.zeros(g.shape, dtype=bool)
    region[tuple(slice(k - 1, k + 1) for k in idx)] = True

    def e(s):
        v = u.copy()
        v.flat[i] += s
        return energy(g, v, params, region) / params.p

    return (8 * (e(h) - e(-h)) - (e(2 * h) - e(-2 * h))) / (12 * h)


def test_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(1.0)
    with pytest.raises(ValueError):
        EnergyParams(2.0, -1e-3)
    assert EnergyParams(1.5).flux_eps == EPS_FLOOR
    assert EnergyParams(3.0).flux_eps == 0.0
    assert EnergyParams(1.5, 0.2).flux_eps == 0.2


def test_gradient_exact_on_coordinates():
    g = cube_grid(1.0, 9)
    x, y, _ = (c[:-1, :-1, :-1] for c in g.coords)
    gx, gy = horizontal_gradient(g, sample(AnalyticFunction("coordinate-t"), g))
    assert np.allclose(gx, 2 * y, atol=1e-13) and np.allclose(gy, -2 * x, atol=1e-13)
    gx, gy = horizontal_gradient(g, sample(AnalyticFunction("coordinate-x"), g))
    assert np.allclose(gx, 1.0, atol=1e-13) and np.allclose(gy, 0.0, atol=1e-13)


def test_duality(rng):
    g = cube_grid(1.0, 11)
    for _ in range(5):
        u = rng.standard_normal(g.shape)
        u[g.boundary] = 0.0
        F = (rng.standard_normal(g.support_shape), rng.standard_normal(g.support_shape))
        gx, gy = horizontal_gradient(g, u)
        lhs = np.sum(gx * F[0] + gy * F[1])
        rhs = -np.sum(u * horizontal_divergence(g, F))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_divergence_zero_on_boundary(rng):
    g = cube_grid(1.0, 7)
    F = (rng.standard_normal(g.support_shape), rng.standard_normal(g.support_shape))
    assert np.all(horizontal_divergence(g, F)[g.boundary] == 0.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("eps", [0.0, 0.1])
def test_gradient_matches_fd(rng, p, eps):
    g = cube_grid(1.0, 9)
    params = EnergyParams(p, eps)
    u = 0.1 * rng.standard_normal(g.shape) + sum(c ** 2 for c in g.coords)
    grad = energy_gradient(g, u, params)
    for i in rng.choice(np.flatnonzero(g.interior), 10, replace=False):
        assert grad.flat[i] == pytest.approx(local_fd(g, u, params, i), rel=1e-7)
    assert np.all(grad[g.boundary] == 0.0)


def test_operator_is_minus_gradient_over_weight(rng):
    g = cube_grid(1.0, 9)
    params = EnergyParams(3.0, 0.1)
    u = rng.standard_normal(g.shape)
    assert np.allclose(operator_A(g, u, params), -energy_gradient(g, u, params) / g.cell_weight,
                       rtol=1e-12, atol=1e-9)


def test_floored_energy_differs_only_in_singular_case(rng):
    g = cube_grid(1.0, 7)
    u = rng.standard_normal(g.shape)
    e0, _ = energy_and_gradient(g, u, EnergyParams(1.5))
    e1, _ = energy_and_gradient(g, u, EnergyParams(1.5), floored=True)
    assert e1 > e0 and e1 - e0 < 1e-9
    assert energy_and_gradient(g, u, EnergyParams(3.0), floored=True)[0] == \
        energy_and_gradient(g, u, EnergyParams(3.0))[0]


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_energy_convex(rng, p):
    g = cube_grid(1.0, 7)
    params = EnergyParams(p, 0.0)
    for _ in range(5):
        u, v = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
        lam = rng.uniform()
        mid = energy(g, lam * u + (1 - lam) * v, params)
        assert mid <= lam * energy(g, u, params) + (1 - lam) * energy(g, v, params) + 1e-12


def test_flux_p2_is_gradient(rng):
    g = cube_grid(1.0, 5)
    u = rng.standard_normal(g.shape)
    fx, fy = flux(g, u, EnergyParams(2.0, 0.7))
    gx, gy = horizontal_gradient(g, u)
    assert np.array_equal(fx, gx) and np.array_equal(fy, gy)


def test_paraboloid_exact_at_p2():
    g = cube_grid(1.0, 17)
    A = operator_A(g, sample(AnalyticFunction("horizontal-paraboloid", (0.0, 1.0)), g),
                   EnergyParams(2.0))
    assert np.allclose(A[measured_mask(g)], 4.0, rtol=0, atol=1e-10)


def test_obstacle_bounds():
    g = cube_grid(1.0, 9)
    psi = AnalyticFunction("valley", (0.5, 2.0))
    params = EnergyParams(2.0)
    b = obstacle_operator_bound(psi, g, params)
    assert np.all(b >= 0)
    x, y, _ = g.coords
    # sub-Laplacian of 2 (x^2 + y^2 + t^2) is 8 + 16 (x^2 + y^2)
    assert np.allclose(b, 8 + 16 * (x ** 2 + y ** 2))
    d = discrete_obstacle_operator(psi, g, params)
    assert d.shape == g.shape


def test_truncation():
    assert truncation_H(-1.0, 0.1) == 0.0
    assert truncation_H(0.05, 0.1) == pytest.approx(0.5)
    assert truncation_H(3.0, 0.1) == 1.0
    with pytest.raises(ValueError):
        truncation_H(0.0, 0.0)


def test_penalty_frozen_value():
    # h int_0^1 (1 - H(0.5 - s)) ds with eta = 0.1: ramp area 0.05 plus 0.5, times h = 2
    val, slope = penalty_value_and_slope(1.0, 0.5, 2.0, 0.1)
    assert val == pytest.approx(1.1, rel=1e-14)
    assert slope == 2.0


@pytest.mark.parametrize("r, psi, eta", [(0.3, 0.5, 0.1), (0.45, 0.5, 0.1), (-0.4, 0.05, 0.2),
                                         (2.0, -1.0, 0.5), (-3.0, -1.0, 0.5)])
def test_penalty_against_quadrature(r, psi, eta):
    h = 1.7
    ref, _ = quad(lambda s: h * (1.0 - truncation_H(psi - s, eta)), 0.0, r,
                  points=[psi - eta, psi], epsabs=1e-13)
    val, slope = penalty_value_and_slope(r, psi, h, eta)
    assert val == pytest.approx(ref, abs=1e-12)
    assert slope == pytest.approx(h * (1.0 - truncation_H(psi - r, eta)))


def test_penalty_is_convex_in_r():
    r = np.linspace(-1, 1, 401)
    val, slope = penalty_value_and_slope(r, 0.2, 1.0, 0.1)
    assert np.all(np.diff(slope) >= 0)
    assert np.all(val[1:-1] <= 0.5 * (val[2:] + val[:-2]) + 1e-15)


@pytest.mark.parametrize("pid, params", [("constant", (2.0,)), ("coordinate-t", ())])
def test_obstacle_bound_zero_cases(pid, params):
    g = cube_grid(1.0, 7)
    assert np.all(obstacle_operator_bound(AnalyticFunction(pid, params), g, EnergyParams(2.0)) == 0.0)


def test_obstacle_bound_valley_a1():
    # Delta_H (x^2 + y^2) = 4 and Delta_H (t^2) = 8 (x^2 + y^2)
    g = cube_grid(1.0, 7)
    x, y, _ = g.coords
    b = obstacle_operator_bound(AnalyticFunction("valley", (1.0, 2.0)), g, EnergyParams(2.0))
    assert np.allclose(b, 2 * (4 + 8 * (x ** 2 + y ** 2)), rtol=1e-14)


def test_penalty_slope_bounds(rng):
    n = 100_000
    r, psi = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)
    h, eta = rng.uniform(0, 5, n), rng.uniform(1e-3, 1, n)
    for k in range(0, n, 10_000):
        sl = slice(k, k + 10_000)
        _, slope = penalty_value_and_slope(r[sl], psi[sl], h[sl], float(eta[k]))
        assert np.all(slope >= 0) and np.all(slope <= h[sl])
    val, slope = penalty_value_and_slope(r, psi, 0.0, 0.3)
    assert np.all(val == 0) and np.all(slope == 0)


def test_convexity_many_pairs(rng):
    g = cube_grid(1.0, 7)
    for p in (1.5, 2.0, 3.0):
        params = EnergyParams(p, 0.0)
        for _ in range(100):
            u, v = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
            eu, ev = energy(g, u, params), energy(g, v, params)
            for th in (0.25, 0.5, 0.75):
                assert energy(g, th * u + (1 - th) * v, params) <= th * eu + (1 - th) * ev + 1e-10
