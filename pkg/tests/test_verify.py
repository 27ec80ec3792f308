import math

import numpy as np
import pytest

from conftest import valley_problem
from heisobstacle.grid import cube_grid
from heisobstacle.heisenberg import AnalyticFunction
from heisobstacle.solver import SolverResult, solve_obstacle, solve_penalized
from heisobstacle.verify import (LEMMAS, SweepAborted, consistency_study, eps_sweep, lemma_suite,
                                 ls_check, negative_control, sandwich_bounds, sandwich_check,
                                 zero_operator_check)
from heisobstacle.verify.checks import UnconvergedInput
from heisobstacle.verify.lemmas import (OracleMissing, at679_integral, bis0_constant,
                                        from10_sides, fu1_sides, fuc_sides, grid_constant, run_lemma,
                                        simh_derivative, simh_proof_form)
from heisobstacle.verify.rates import (fit_loglog, prefactor_power, theoretical_exponent,
                                       validate_eps_list)

GOLDEN = (1 + math.sqrt(5)) / 2


# -- lemma oracles ----------------------------------------------------------

@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_fu1_constant_against_sharp_value(p):
    # <|a|^(p-2) a - |b|^(p-2) b, a - b> >= 2^(2-p) |a - b|^p is sharp, doubled to 2^(p-1)
    c = grid_constant("Fu1", p)
    assert 0.99 * 2 ** (p - 1) <= c <= 2 ** (p - 1) * (1 + 1e-12)


def test_from10_constant_at_p2():
    # sup (1 + l^2) / ((l - 1)^2 + 1) = golden ratio squared, at l = golden ratio
    c = grid_constant("from-10-to-11", 2.0) / 2
    assert 0.98 * GOLDEN ** 2 <= c <= GOLDEN ** 2 * (1 + 1e-12)
    a, b = np.array([[1.0, 0.0]]), np.array([[GOLDEN, 0.0]])
    lhs, rhs = from10_sides(2.0, 0.0, a, b)
    assert lhs[0] / rhs[0] == pytest.approx(GOLDEN ** 2)


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0])
def test_bis0_constant_is_one(p):
    # (1 + tau)^(p/2) - tau^(p/2) decreases from 1 when p <= 2
    assert bis0_constant(p) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(OracleMissing):
        bis0_constant(3.0)


def test_at679_beta_oracle():
    # b = 0, eps = 0: 2 int (1-t) t^(-1/2) dt = 2 B(1/2, 2) = 8/3
    a = np.array([[0.3, -1.2]])
    b = np.zeros((1, 2))
    val = at679_integral(0.0 + np.zeros(1), a, b, 1.0, 0.25)
    assert val[0] == pytest.approx(8.0 / 3.0, rel=1e-8)


def test_trivial_lemma_cases():
    A = np.array([[0.4, -1.0, 2.0, 0.0]])
    lhs, rhs = fu1_sides(3.0, A, A)
    assert lhs[0] == 0.0 and rhs[0] == 0.0
    lhs, rhs = fuc_sides(3.0, 0.2, np.zeros(1))
    assert lhs[0] == 0.0 and rhs[0] > 0
    # a = b, kappa = 1: 2 Psi(eps + 2|a|^2) int (1-t) dt / Psi(eps + |a|^2) with Psi = x^q
    a = np.array([[1.0, 2.0]])
    val = at679_integral(np.array([0.5]), a, a, 1.0, 0.7)
    assert val[0] == pytest.approx((10.5 / 5.5) ** 0.7, rel=1e-9)


def test_fu1_sides_p2_equal():
    A, B = np.array([[1.0, 2.0]]), np.array([[-0.5, 0.25]])
    lhs, rhs = fu1_sides(2.0, A, B)
    assert lhs[0] == pytest.approx(rhs[0])


def test_simh_derivative_forms(rng):
    h, d = rng.standard_normal((50, 2)), rng.standard_normal((50, 2))
    p, eps = 3.0, 0.2
    step = 1e-6

    def phi(v):
        return (eps + np.sum(v * v, axis=-1)) ** (0.5 * p - 1) * np.sum(v * d, axis=-1)

    fd = (phi(h + step * d) - phi(h - step * d)) / (2 * step)
    assert np.allclose(simh_derivative(p, eps, h, d), fd, rtol=1e-7)
    # the proof's form agrees only when h is parallel to d
    assert np.allclose(simh_proof_form(p, eps, 2.5 * d, d), simh_derivative(p, eps, 2.5 * d, d))


def test_unknown_lemma():
    with pytest.raises(OracleMissing):
        grid_constant("nope", 2.0)
    with pytest.raises(OracleMissing):
        run_lemma("nope", np.random.default_rng(0), 10)


@pytest.mark.parametrize("lemma", [name for name in LEMMAS if name != "AT679"])
def test_lemma_small_run(lemma):
    # worst-margin stability is only meaningful at full trial counts
    rep = run_lemma(lemma, np.random.default_rng(3), 2000, min_trials=1000)
    assert rep.violations == 0 and all(v for k, v in rep.notes.items() if k.startswith("check_"))
    assert rep.trials == 4000
    assert 0 < rep.worst_margin <= 1 + 1e-9


def test_at679_small_run():
    rep = run_lemma("AT679", np.random.default_rng(3), 300, min_trials=100)
    assert rep.passed and rep.constant == 0.5


def test_lemma_suite_deterministic_and_guarded():
    a = lemma_suite(5, trials=500, min_trials=500, lemmas=("Fu2", "7bis0"))
    b = lemma_suite(5, trials=500, min_trials=500, lemmas=("7bis0",))
    assert a[1].worst_margin == b[0].worst_margin
    with pytest.raises(ValueError):
        lemma_suite(0, trials=10, min_trials=100)


def test_trials_below_minimum_fail():
    rep = run_lemma("Fu2", np.random.default_rng(0), 40, min_trials=100)
    assert not rep.passed


# -- obstacle checks --------------------------------------------------------

@pytest.fixture(scope="module")
def solved():
    prob = valley_problem(n=13)
    return prob, solve_obstacle(prob)


def test_ls_lower_bound_and_negative_control(solved):
    prob, res = solved
    rep = ls_check(res, prob, tol=1e-5)
    assert rep.lower_violations == 0
    assert rep.min_A >= -1e-5
    assert rep.active_fraction > 0.01
    bad = ls_check(negative_control(res, prob), prob, tol=1e-5)
    assert not bad.passed and bad.lower_violations > 0
    assert len(rep.row()) == 12


def test_ls_check_rejects_unconverged(solved):
    prob, res = solved
    with pytest.raises(UnconvergedInput):
        ls_check(SolverResult(res.u, res.multiplier), prob)


def test_sandwich_on_solve(solved):
    prob, obst = solved
    reports = []
    for eta in (0.1, 0.05):
        pen = solve_penalized(prob, eta, boundary=obst.u)
        reports.append(sandwich_check(obst, pen, prob.psi, eta, **sandwich_bounds(prob)))
    assert all(r.passed for r in reports)
    assert reports[0].sup_diff / reports[1].sup_diff >= 1.5


def test_sandwich_synthetic_values():
    u = np.zeros((3, 3, 3))
    ue = u - 0.2
    psi = u + 1.0
    rep = sandwich_check(SolverResult(u, u, converged=True, grad_norm_history=[0.0]),
                         SolverResult(ue, u, converged=True, grad_norm_history=[0.0]),
                         psi, 0.1, 1e-4)
    assert rep.gap_psi == pytest.approx(-1.2)
    assert rep.gap_u == pytest.approx(-0.2)
    assert rep.gap_band == pytest.approx(0.1)
    assert not rep.checks["u_within_eta"] and not rep.checks["uniform"]
    with pytest.raises(ValueError):
        sandwich_check(SolverResult(u, u, converged=True), SolverResult(ue, u, converged=True),
                       np.zeros((2, 2, 2)), 0.1)


# -- rates ------------------------------------------------------------------

def test_exponents():
    assert theoretical_exponent(1.5) == 0.5625
    assert theoretical_exponent(3.0) == 1.0
    assert prefactor_power(1.5) == 0.25
    assert prefactor_power(4.0) == 0.75


def test_fit_loglog_exact():
    x = np.array([1e-1, 1e-2, 1e-3])
    slope, c = fit_loglog(x, 3.0 * x ** 1.7)
    assert slope == pytest.approx(1.7) and c == pytest.approx(3.0)


@pytest.mark.parametrize("eps", [[0.1], [0.1, 0.1, 1e-4], [1e-4, 1e-1], [0.1, 0.01], [0.1, -1.0]])
def test_bad_eps_lists(eps):
    with pytest.raises(ValueError):
        validate_eps_list(eps)


def test_eps_sweep_p2_invariance():
    prob = valley_problem(n=9)
    rep = eps_sweep(prob, [1e-1, 1e-2, 1e-3, 1e-4], R=0.5)
    assert rep.max_value <= rep.noise_floor
    assert len(rep.rows()) == 4


def test_eps_sweep_p3_decays():
    prob = valley_problem(n=9, p=3.0)
    rep = eps_sweep(prob, [1e-1, 1e-2, 1e-3, 1e-4], R=0.5)
    assert rep.values[0] > rep.values[1] and rep.monotone


def test_eps_sweep_guards():
    prob = valley_problem(n=9)
    with pytest.raises(ValueError, match="boundary layer"):
        eps_sweep(prob, [1e-1, 1e-2, 1e-3, 1e-4], R=1.0)
    with pytest.raises(ValueError, match="no grid node"):
        eps_sweep(valley_problem(n=10), [1e-1, 1e-2, 1e-3, 1e-4], R=1e-3)
    with pytest.raises(SweepAborted):
        eps_sweep(valley_problem(n=9, max_iter=2), [1e-1, 1e-2, 1e-3, 1e-4], R=0.5)


# -- consistency ------------------------------------------------------------

def test_consistency_exact_at_p2():
    rep = consistency_study(AnalyticFunction("horizontal-paraboloid", (0.0, 1.0)), 2.0, (9, 17))
    assert rep.exact and rep.passed


def test_consistency_first_order_at_p3():
    rep = consistency_study(AnalyticFunction("horizontal-paraboloid", (0.0, 1.0)), 3.0, (9, 17, 33))
    assert not rep.exact
    assert rep.slope == pytest.approx(1.0, abs=0.1) and rep.passed
    assert len(rep.rows()) == 3


def test_consistency_needs_two_resolutions():
    with pytest.raises(ValueError):
        consistency_study(AnalyticFunction("coordinate-x"), 2.0, (9,))


def test_zero_operator_on_t():
    assert zero_operator_check(AnalyticFunction("coordinate-t"), 17) <= 1e-10
