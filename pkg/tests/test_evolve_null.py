import numpy as np
import pytest

from diagnostics import mass_profile, null_regularity_monitor
from evolve_null import (NullGrid, axis_proper_time, axis_w, classify_regions, derivative, diamond_march_step,
                         init_characteristic_data, init_from_cone_samples, mass_flux_residual,
                         null_constraint_residuals, null_mass, run_null, stress_components)
from exceptions import FocusingBreakdown, RegionBreach, ValidationError
from initdata import DataProfile


def _pulse_run(hyperbolic, h, u_bar_max=6.0, A=0.1, sigma=1.0):
    grid = NullGrid.from_extent(u_bar_max, h)
    return run_null(init_characteristic_data(DataProfile(A=A, sigma=sigma), grid, 1.0, hyperbolic)).state


@pytest.fixture
def vacuum_null(hyperbolic):
    grid = NullGrid(0.1, 20)
    return run_null(init_characteristic_data(DataProfile(A=0.0), grid, 1.0, hyperbolic)).state


def test_grid_validation():
    grid = NullGrid.from_extent(2.0, 0.5)
    assert grid.n == 4
    assert grid.u_max == pytest.approx(2.0)
    assert grid.domain[1, 3] and not grid.domain[3, 1]
    with pytest.raises(ValidationError):
        NullGrid(0.0, 10)
    with pytest.raises(ValidationError):
        NullGrid(0.1, 2)


def test_vacuum_cone_is_flat(hyperbolic):
    grid = NullGrid(0.1, 20)
    state = init_characteristic_data(DataProfile(A=0.0), grid, 1.0, hyperbolic)
    np.testing.assert_allclose(state.r[0], 0.5 * grid.u_bar, atol=1e-14)
    assert np.all(state.logOmega[0] == 0.0)


def test_vacuum_march_is_minkowski(vacuum_null):
    grid = vacuum_null.grid
    inside = grid.domain
    np.testing.assert_allclose(vacuum_null.r[inside], 0.5 * grid.separation[inside], atol=1e-12)
    np.testing.assert_allclose(vacuum_null.lam[inside], 0.5, atol=1e-12)
    np.testing.assert_allclose(vacuum_null.nu[inside], -0.5, atol=1e-12)
    np.testing.assert_allclose(null_mass(vacuum_null)[inside], 0.0, atol=1e-12)
    assert np.all(classify_regions(vacuum_null)[inside] == "R")
    assert np.all(classify_regions(vacuum_null)[~inside] == "")
    assert null_regularity_monitor(vacuum_null, axis_gap=grid.h) == pytest.approx(2.0)
    u, w = axis_w(vacuum_null)
    assert np.all(w == 0.0)


def test_vacuum_constraints_vanish(vacuum_null):
    residuals = null_constraint_residuals(vacuum_null)
    assert residuals["res_Tuu"] < 1e-10
    assert residuals["res_Tvv"] < 1e-10


def test_focusing_breakdown(hyperbolic):
    with pytest.raises(FocusingBreakdown):
        init_characteristic_data(DataProfile(A=0.5, sigma=1.0), NullGrid.from_extent(8.0, 0.1), 100.0, hyperbolic)


def test_diamond_step(flat):
    h = 0.1
    D = diamond_march_step((1.0, 0.0, 0.0), (0.95, 0.0, 0.0), (1.05, 0.0, 0.0), h, 1.0, flat)
    assert D[0] == pytest.approx(1.0)
    with pytest.raises(RegionBreach):
        diamond_march_step((1.0, 0.0, 0.0), (1.05, 0.0, 0.0), (1.1, 0.0, 0.0), h, 1.0, flat)


def test_derivative_exact_for_quadratics():
    h = 0.1
    j = np.arange(8, dtype=float)
    X = np.tile((j * h) ** 2, (8, 1))
    np.testing.assert_allclose(derivative(X, h, axis=1), np.tile(2.0 * j * h, (8, 1)), atol=1e-12)
    np.testing.assert_allclose(derivative(X, h, axis=0), 0.0, atol=1e-12)


def test_pulse_stays_regular(hyperbolic):
    state = _pulse_run(hyperbolic, 0.1)
    inside = state.grid.domain
    assert np.all(classify_regions(state)[inside] == "R")
    stress = stress_components(state)
    for key in ("S_uu", "S_ubub", "S_uub"):
        values = stress[key][np.isfinite(stress[key])]
        assert np.all(values >= 0.0)
    m = mass_profile(state)
    m_infinity = m[0, -1]
    assert m_infinity > 0.0
    assert m[inside].min() > -1e-4
    assert m[inside].max() <= m_infinity + 1e-4
    assert np.nanmin(state.lam) > 0.0


def test_constraint_residuals_converge(hyperbolic):
    coarse = null_constraint_residuals(_pulse_run(hyperbolic, 0.2))
    fine = null_constraint_residuals(_pulse_run(hyperbolic, 0.1))
    for key in ("res_Tuu", "res_Tvv"):
        assert fine[key] < coarse[key] / 3.0


def test_corrupted_lapse_is_detected(hyperbolic):
    state = _pulse_run(hyperbolic, 0.1)
    baseline = null_constraint_residuals(state)["res_Tuu"]
    corrupted = state.copy()
    corrupted.logOmega[5, 6:] += np.log(1.01)
    assert null_constraint_residuals(corrupted)["res_Tuu"] > 10.0 * baseline


def test_mass_flux_residual_decreases(hyperbolic):
    coarse = mass_flux_residual(_pulse_run(hyperbolic, 0.2))
    fine = mass_flux_residual(_pulse_run(hyperbolic, 0.1))
    assert fine < coarse / 3.0


def test_trapped_patch_is_classified(vacuum_null):
    state = vacuum_null.copy()
    state.lam[2:4, 10:12] = -0.1
    state.lam[5, 15] = 0.0
    labels = classify_regions(state)
    assert np.all(labels[2:4, 10:12] == "T")
    assert labels[5, 15] == "A"
    state.nu[6, 16] = 0.2
    assert classify_regions(state)[6, 16] == "X"


def test_sampled_cone_data(hyperbolic):
    grid = NullGrid(0.1, 20)
    state = init_from_cone_samples(grid, grid.u_bar, np.zeros(21), 1.0, hyperbolic)
    np.testing.assert_allclose(state.r[0], 0.5 * grid.u_bar, atol=1e-14)


def test_axis_lapse_follows_from_regularity(hyperbolic, flat):
    state = _pulse_run(hyperbolic, 0.1)
    diag = np.arange(state.grid.n + 1)
    assert state.logOmega[0, 0] == 0.0
    assert np.max(np.abs(state.logOmega[diag, diag])) > 1e-6
    np.testing.assert_allclose(state.lam[diag, diag], 0.5 * np.exp(state.logOmega[diag, diag]))
    np.testing.assert_allclose(null_mass(state)[diag, diag], 0.0, atol=1e-14)
    tau = axis_proper_time(state)
    assert np.all(np.diff(tau) > 0.0)

    grid = NullGrid(0.1, 20)
    linear = run_null(init_characteristic_data(DataProfile(A=0.1, sigma=1.0), grid, 0.0, flat)).state
    np.testing.assert_allclose(axis_proper_time(linear), grid.u, atol=1e-12)


def test_tuu_constraint_is_pointwise_second_order(hyperbolic):
    worst = []
    for h in (0.2, 0.1):
        state = _pulse_run(hyperbolic, h, u_bar_max=4.0)
        column = state.grid.n
        r = state.r[:column, column]
        inv = np.exp(-2.0 * state.logOmega[:column, column])
        phi = state.phi[:column, column]
        inner = slice(1, -1)
        upper = 0.5 * (inv[inner] + inv[2:]) * (r[2:] - r[inner])
        lower = 0.5 * (inv[inner] + inv[:-2]) * (r[inner] - r[:-2])
        phi_u = (phi[2:] - phi[:-2]) / (2.0 * h)
        residual = (upper - lower) / h ** 2 + inv[inner] * r[inner] * np.square(phi_u)
        worst.append(np.max(np.abs(residual)))
    assert worst[1] < worst[0] / 3.0
