import math

import numpy as np
import pytest
from scipy.special import beta as beta_fn

from exceptions import DomainError
from flatwave import (POLY_SOLUTIONS, PolySolution, bound_lambda_du_mu, exact_poly_solution, kernel_J,
                      kernel_K, kernel_closed_form, kernel_dJ, kernel_dK, kernel_sample, mu_geometry,
                      represent_solution)


def test_kernels_at_minus_one():
    assert kernel_K(-1.0) == pytest.approx(math.pi / math.sqrt(2.0), rel=1e-10)
    assert kernel_J(-1.0) == pytest.approx(math.pi / math.sqrt(2.0), rel=1e-10)


def test_kernels_at_zero():
    assert kernel_K(0.0) == pytest.approx(0.5 * beta_fn(0.75, 0.5), rel=1e-9)
    assert kernel_J(0.0) == pytest.approx(0.5 * beta_fn(0.25, 0.5), rel=1e-9)
    assert kernel_K(0.0) == pytest.approx(1.19815, abs=1e-5)
    assert kernel_J(0.0) == pytest.approx(2.62206, abs=1e-5)


@pytest.mark.parametrize("mu", [-0.9, -0.3, 0.5, 0.99, 1.01, 2.0, 10.0])
def test_quadrature_matches_elliptic_form(mu):
    K, J = kernel_closed_form(mu)
    assert kernel_K(mu) == pytest.approx(K, rel=1e-8, abs=1e-12)
    assert kernel_J(mu) == pytest.approx(J, rel=1e-8)


def test_singular_point():
    assert kernel_K(1.0) == -math.inf
    assert kernel_J(1.0) == math.inf
    assert math.isnan(kernel_dJ(1.0))
    assert kernel_J(1.0 - 1e-8) > kernel_J(1.0 - 1e-4)
    assert kernel_J(1.0 + 1e-8) > kernel_J(1.0 + 1e-4)


def test_domain():
    with pytest.raises(DomainError):
        kernel_K(-1.5)


def test_K_decay():
    mu = 1e4
    assert mu ** 1.5 * kernel_K(mu) == pytest.approx(-math.pi / 4.0, rel=1e-3)


@pytest.mark.parametrize("mu", [-0.5, 0.5, 2.0])
def test_derivatives_match_differences(mu):
    step = 1e-5
    fd_K = (kernel_K(mu + step) - kernel_K(mu - step)) / (2.0 * step)
    fd_J = (kernel_J(mu + step) - kernel_J(mu - step)) / (2.0 * step)
    assert kernel_dK(mu) == pytest.approx(fd_K, rel=1e-5)
    assert kernel_dJ(mu) == pytest.approx(fd_J, rel=1e-5)


def test_J_decreasing_beyond_one():
    for mu in (1.5, 3.0, 10.0):
        assert kernel_dJ(mu) < 0.0
    for mu in (-0.5, 0.0, 0.5):
        assert kernel_dJ(mu) > 0.0


def test_log_singularity_of_dJ():
    gaps = np.logspace(-6, -1, 6)
    for mu in np.concatenate((1.0 - gaps, 1.0 + gaps)):
        assert abs(mu - 1.0) * abs(kernel_dJ(mu)) <= 2.0 * kernel_J(mu)


def test_kernel_sample():
    sample = kernel_sample(0.0)
    assert sample.mu == 0.0
    assert sample.K_val == pytest.approx(kernel_K(0.0))
    assert sample.abs_err_estimate >= 0.0


def test_mu_geometry_examples():
    assert mu_geometry(0.0, 1.0, -1.0, 1.0).mu == pytest.approx(-0.5)

    on_mu_one = mu_geometry(0.0, 0.5, -0.8, 0.3)
    assert on_mu_one.mu == pytest.approx(1.0)
    assert on_mu_one.lambda_du_mu == pytest.approx(0.0, abs=1e-14)
    assert on_mu_one.lambda_star == pytest.approx(0.5)

    mantle = mu_geometry(-0.2, 0.3, -0.4, 0.1)
    assert mantle.mu == pytest.approx(-1.0)

    with pytest.raises(DomainError):
        mu_geometry(-0.5, 0.0, -1.0, 0.2)


def test_lambda_du_mu_bound():
    report = bound_lambda_du_mu(5000, seed=3)
    assert report["nonneg_bound_ok"]
    assert report["max_ratio_nonneg"] <= 0.5 + 1e-12
    assert report["n_nonneg"] + report["n_neg"] <= 5000
    assert math.isfinite(report["C_global"])


@pytest.mark.parametrize("kind", sorted(POLY_SOLUTIONS))
def test_poly_solutions_solve_operator(kind):
    np.testing.assert_allclose(exact_poly_solution(kind).operator_coefficients(), 0.0, atol=1e-14)


def test_poly_solution_values():
    quad = exact_poly_solution("quad")
    assert quad(-1.0, 0.0) == pytest.approx(4.0)
    fields = quad.equivariant_fields(0.5, np.array([0.0, 1.0]))
    np.testing.assert_allclose(fields["phi"], [0.0, 2.0])
    np.testing.assert_allclose(fields["Phi"], [1.0, 4.0])
    np.testing.assert_allclose(fields["Pi"], [0.0, 4.0])
    with pytest.raises(DomainError):
        exact_poly_solution("quartic")
    with pytest.raises(ValueError):
        PolySolution("bad", {(2, 0): 1.0})


def test_representation_without_sources():
    def phi0(tau, rho):
        return 0.3 * rho

    assert represent_solution(phi0, None, None, -0.5, 0.25) == pytest.approx(0.075)


def test_representation_manufactured_solution():
    # phi = (1 + tau)^4 rho has zero data at tau = -1 and source h = -12 (1 + tau)^2 rho
    def F2(sigma, lam):
        return -12.0 * (1.0 + sigma) ** 2 * lam ** 3

    value = represent_solution(lambda tau, rho: 0.0, None, F2, -0.5, 0.25)
    assert value == pytest.approx(0.5 ** 4 * 0.25, rel=1e-4)


def test_representation_is_linear_in_sources():
    def F2(sigma, lam):
        return (1.0 + sigma) * lam ** 3

    single = represent_solution(lambda tau, rho: 0.0, None, F2, -0.4, 0.2)
    double = represent_solution(lambda tau, rho: 0.0, None, lambda s, l: 2.0 * F2(s, l), -0.4, 0.2)
    assert double == pytest.approx(2.0 * single, rel=1e-7)


def test_representation_domain():
    with pytest.raises(DomainError):
        represent_solution(lambda tau, rho: 0.0, None, None, 0.5, 0.1)
    with pytest.raises(DomainError):
        represent_solution(lambda tau, rho: 0.0, None, None, -0.5, 0.6)
