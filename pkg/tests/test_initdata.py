import math

import numpy as np
import pytest

from exceptions import SupercriticalEnergy, SupportOverflow, ValidationError
from initdata import (DataProfile, PolarState, RadialGrid, build_initial_state, build_profile,
                      check_subcriticality, energy, energy_profile, profile_values, solve_metric_slice)


def test_grid():
    grid = RadialGrid.from_extent(10.0, 200)
    assert grid.dr == pytest.approx(0.05)
    assert grid.r_max == pytest.approx(10.0)
    assert len(grid.r) == 201
    with pytest.raises(ValidationError):
        RadialGrid(3, 0.1)
    with pytest.raises(ValidationError):
        RadialGrid(10, 0.0)


def test_zero_amplitude_is_vacuum(vacuum_state):
    assert np.all(vacuum_state.phi == 0.0)
    assert np.all(vacuum_state.alpha == 0.0)
    assert np.all(vacuum_state.beta == 0.0)
    assert energy(vacuum_state) == 0.0


def test_centered_profile_formula():
    r = np.linspace(0.0, 4.0, 41)
    phi0, Phi0, Pi0 = profile_values(DataProfile(A=0.3, sigma=1.5), r)
    np.testing.assert_allclose(phi0, 0.3 * r * np.exp(-(r / 1.5) ** 2), rtol=1e-15, atol=1e-15)
    assert np.all(Pi0 == 0.0)
    fd = np.gradient(phi0, r, edge_order=2)
    np.testing.assert_allclose(Phi0, fd, atol=5e-3)


def test_shell_profile_peak():
    grid = RadialGrid.from_extent(8.0, 400)
    data = build_profile(DataProfile(kind="shell", A=0.05, sigma=1.0, r0=2.0), grid)
    assert data["phi0"][100] == pytest.approx(0.1, rel=1e-14)


def test_ingoing_datum():
    r = np.linspace(0.0, 3.0, 31)
    phi0, Phi0, Pi0 = profile_values(DataProfile(A=0.1, time_symmetric=False, ingoing=0.5), r)
    w = np.where(r > 0, phi0 / np.where(r > 0, r, 1.0), Phi0)
    np.testing.assert_allclose(Pi0, 0.5 * (Phi0 - w), atol=1e-15)


def test_support_overflow():
    with pytest.raises(SupportOverflow):
        build_profile(DataProfile(A=0.1, sigma=5.0), RadialGrid.from_extent(10.0, 100))


def test_custom_table_needs_axis_row():
    table = [[0.0, 0.1], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
    with pytest.raises(ValidationError):
        profile_values(DataProfile(kind="custom-table", table=table), np.linspace(0, 3, 4))


def test_custom_table_momentum_column_is_used():
    rows = [[0.1 * i, 0.05 * (0.1 * i) * math.exp(-(0.1 * i) ** 2), -0.02 * (0.1 * i) * math.exp(-(0.1 * i) ** 2)]
            for i in range(61)]
    r = np.linspace(0.0, 6.0, 121)
    profile = DataProfile(kind="custom-table", table=rows)
    _, _, Pi0 = profile_values(profile, r)
    np.testing.assert_allclose(Pi0, -0.02 * r * np.exp(-r ** 2), atol=1e-6)
    assert np.max(np.abs(Pi0)) > 1e-3

    _, _, Pi_outside = profile_values(profile, np.array([6.5, 7.0]))
    assert np.all(Pi_outside == 0.0)

    state = build_initial_state(profile, RadialGrid.from_extent(10.0, 200), 0.0)
    np.testing.assert_allclose(state.Pi[1:121], Pi0[1:], atol=1e-6)


def test_two_column_table_keeps_time_symmetric_default():
    rows = [[0.1 * i, 0.05 * (0.1 * i) * math.exp(-(0.1 * i) ** 2)] for i in range(61)]
    _, _, Pi0 = profile_values(DataProfile(kind="custom-table", table=rows), np.linspace(0.0, 6.0, 61))
    assert np.all(Pi0 == 0.0)


def test_inconsistent_phi_derivative_is_rejected(monkeypatch):
    import initdata

    exact = initdata.profile_values

    def skewed(profile, r):
        phi0, Phi0, Pi0 = exact(profile, r)
        return phi0, 1.1 * Phi0, Pi0

    monkeypatch.setattr(initdata, "profile_values", skewed)
    with pytest.raises(ValidationError):
        build_initial_state(DataProfile(A=0.1), RadialGrid.from_extent(8.0, 100), 0.0)


@pytest.mark.parametrize("n", [20, 400])
def test_consistent_profiles_pass_at_any_resolution(n):
    for profile in (DataProfile(A=0.1), DataProfile(kind="shell", A=0.05, sigma=1.0, r0=2.0)):
        state = build_initial_state(profile, RadialGrid.from_extent(10.0, n), 0.0)
        assert np.all(np.isfinite(state.beta))


def test_flat_energy_of_centered_pulse(flat):
    A, sigma = 0.2, 1.0
    state = build_initial_state(DataProfile(A=A, sigma=sigma), RadialGrid.from_extent(8.0, 800), 0.0, flat)
    assert energy(state) == pytest.approx(math.pi * A ** 2 * sigma ** 2 / 2.0, rel=1e-4)


def test_energy_profile_monotone_and_alpha_below_beta(pulse_state):
    E = energy_profile(pulse_state)
    assert np.all(np.diff(E) >= 0.0)
    assert np.all(pulse_state.alpha <= pulse_state.beta + 1e-15)
    assert pulse_state.beta[0] == 0.0
    assert np.all(np.diff(pulse_state.beta) >= 0.0)


def _metric_identity_error(n, target):
    state = build_initial_state(DataProfile(A=0.3, sigma=1.0), RadialGrid.from_extent(10.0, n), 1.0, target)
    identity = np.exp(-state.beta) + state.kappa * energy_profile(state) / (2.0 * math.pi) - 1.0
    return float(np.max(np.abs(identity)))


def test_metric_identity_converges(hyperbolic):
    coarse = _metric_identity_error(200, hyperbolic)
    fine = _metric_identity_error(400, hyperbolic)
    assert fine < 1e-4
    assert coarse / fine > 3.0


def test_supercritical_flat_data(flat):
    with pytest.raises(SupercriticalEnergy):
        build_initial_state(DataProfile(A=3.0, sigma=1.0), RadialGrid.from_extent(10.0, 200), 1.0, flat)


@pytest.mark.parametrize("ratio,admissible", [(0.9, True), (0.97, False)])
def test_subcriticality_margin(flat, ratio, admissible):
    # flat energy pi A^2/2 at sigma = 1, so kappa E/2 pi = A^2/4 with kappa = 1
    A = math.sqrt(4.0 * ratio)
    state = build_initial_state(DataProfile(A=A, sigma=1.0), RadialGrid.from_extent(10.0, 800), 0.0, flat)
    state.kappa = 1.0
    report = check_subcriticality(state)
    assert report["kappa_E_over_2pi"] == pytest.approx(ratio, rel=1e-4)
    assert report["admissible"] is admissible
    assert report["m_infinity"] == pytest.approx(1.0 - (1.0 - report["kappa_E_over_2pi"]) ** 2)


def test_metric_solve_is_trivial_without_coupling(flat):
    grid = RadialGrid.from_extent(5.0, 50)
    r = grid.r
    state = PolarState(0.0, grid, 0.1 * r * np.exp(-r * r), np.zeros_like(r), np.zeros_like(r),
                       kappa=0.0, target=flat)
    alpha, beta = solve_metric_slice(state)
    assert np.all(alpha == 0.0) and np.all(beta == 0.0)


def test_energy_radius_out_of_range(pulse_state):
    from exceptions import DomainError
    with pytest.raises(DomainError):
        energy(pulse_state, 20.0)
