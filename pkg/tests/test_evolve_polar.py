import math

import numpy as np
import pytest

from evolve_polar import (EvolveConfig, _derivative, evolve_run, kreiss_oliger, max_stable_dt, momentum_residual,
                          regularity_monitor, rk4_step, spatial_rhs)
from exceptions import CflViolation, SupercriticalEnergy, ValidationError
from flatwave import exact_poly_solution
from initdata import DataProfile, RadialGrid, build_initial_state, energy


def _poly_state(kind, t0, flat, r_max=1.0, n=20):
    return build_initial_state(DataProfile(kind="poly", solution=kind, t0=t0), RadialGrid.from_extent(r_max, n),
                               0.0, flat)


def test_vacuum_rhs_is_zero(vacuum_state):
    for rate in spatial_rhs(vacuum_state):
        assert np.all(rate == 0.0)


def test_quadratic_solution_rhs_is_exact(flat):
    state = _poly_state("quad", 0.3, flat)
    dphi, dPhi, dPi = spatial_rhs(state)
    exact = exact_poly_solution("quad").equivariant_fields(0.3, state.grid.r)
    np.testing.assert_allclose(dphi, exact["dphi"], atol=1e-9)
    np.testing.assert_allclose(dPhi, exact["dPhi"], atol=1e-9)
    np.testing.assert_allclose(dPi, exact["dPi"], atol=1e-9)


def test_rhs_regular_at_axis(pulse_state):
    dphi, dPhi, dPi = spatial_rhs(pulse_state)
    assert all(np.all(np.isfinite(x)) for x in (dphi, dPhi, dPi))
    assert dphi[0] == 0.0 and dPi[0] == 0.0


def test_interior_derivative_is_fourth_order():
    errors = []
    for n in (20, 40):
        r = np.linspace(0.0, 1.0, n + 1)
        errors.append(np.max(np.abs(_derivative(np.sin(r), r[1], parity=-1) - np.cos(r))[:n - 1]))
    assert math.log2(errors[0] / errors[1]) > 3.5
    even = _derivative(np.cos(np.linspace(0.0, 1.0, 21)), 0.05, parity=1)
    assert even[0] == 0.0


def test_kreiss_oliger_annihilates_low_order_parity_data():
    r = np.linspace(0.0, 2.0, 21)
    dr = r[1]
    np.testing.assert_allclose(kreiss_oliger(np.full_like(r, 3.0), dr, 0.5, parity=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(kreiss_oliger(r ** 3 - r, dr, 0.5, parity=-1), 0.0, atol=1e-10)
    assert np.all(kreiss_oliger(np.sin(r), dr, 0.0, parity=-1) == 0.0)
    rough = np.where(np.arange(21) % 2 == 0, 1.0, -1.0)
    assert np.max(np.abs(kreiss_oliger(rough, dr, 0.5, parity=1))) > 0.0


def test_evolve_config_validation():
    with pytest.raises(ValidationError) as info:
        EvolveConfig(cfl=1.5, t_end=-1.0)
    assert len(info.value.violations) == 2
    with pytest.raises(ValidationError):
        EvolveConfig(boundary="exact")
    with pytest.raises(ValidationError):
        EvolveConfig(boundary="reflecting")


def test_cfl_violation(pulse_state):
    cfg = EvolveConfig(t_end=1.0)
    with pytest.raises(CflViolation):
        rk4_step(pulse_state, 2.0 * max_stable_dt(pulse_state, cfg.cfl), cfg)


def test_vacuum_stays_vacuum(vacuum_state):
    result = evolve_run(vacuum_state, EvolveConfig(t_end=1.0))
    assert result.state.t == pytest.approx(1.0)
    assert not result.halted
    assert result.steps == math.ceil(1.0 / (0.5 * vacuum_state.grid.dr) - 1e-9)
    for field in (result.state.phi, result.state.Phi, result.state.Pi, result.state.beta):
        assert np.all(field == 0.0)
    assert regularity_monitor(result.state) == 1.0


def test_quadratic_solution_evolves_exactly(flat):
    solution = exact_poly_solution("quad")
    state0 = _poly_state("quad", 0.0, flat, n=40)
    cfg = EvolveConfig(t_end=0.5, dissipation_eps=0.0, boundary="exact", exact=solution)
    state = evolve_run(state0, cfg).state
    exact = solution.equivariant_fields(state.t, state.grid.r)
    for name in ("phi", "Phi", "Pi"):
        np.testing.assert_allclose(getattr(state, name), exact[name], atol=1e-10)


def _cubic_error(flat, n):
    solution = exact_poly_solution("cubic")
    state0 = _poly_state("cubic", 0.0, flat, n=n)
    cfg = EvolveConfig(t_end=0.5, dissipation_eps=0.0, boundary="exact", exact=solution)
    state = evolve_run(state0, cfg).state
    exact = solution.equivariant_fields(state.t, state.grid.r)
    return max(np.max(np.abs(state.phi - exact["phi"])), np.max(np.abs(state.Phi - exact["Phi"])))


def test_cubic_solution_converges_at_second_order(flat):
    errors = [_cubic_error(flat, n) for n in (20, 40, 80)]
    assert errors[-1] < 1e-3
    assert math.log2(errors[1] / errors[2]) > 1.5


def test_energy_drift_is_small(hyperbolic):
    state0 = build_initial_state(DataProfile(A=0.1, sigma=1.0), RadialGrid.from_extent(10.0, 400), 1.0, hyperbolic)
    E0 = energy(state0)
    state = evolve_run(state0, EvolveConfig(t_end=1.0)).state
    assert abs(energy(state) - E0) / E0 < 1e-3


def test_parity_and_axis_values(pulse_state):
    state = evolve_run(pulse_state, EvolveConfig(t_end=0.5)).state
    assert state.phi[0] == 0.0
    assert state.Pi[0] == 0.0
    assert state.alpha[0] == 0.0 and state.beta[0] == 0.0


def test_momentum_residual_decreases(hyperbolic):
    residuals = []
    for n in (50, 100, 200):
        state0 = build_initial_state(DataProfile(A=0.2, sigma=1.0), RadialGrid.from_extent(10.0, n), 1.0, hyperbolic)
        cfg = EvolveConfig(t_end=0.5)
        dt = max_stable_dt(state0, cfg.cfl)
        state1 = rk4_step(state0, dt, cfg)
        state2 = rk4_step(state1, dt, cfg)
        residuals.append(momentum_residual(state2, state1, dt))
    assert residuals[2] < residuals[0] / 4.0


def test_supercritical_start_is_rejected(flat):
    state = build_initial_state(DataProfile(A=1.0, sigma=1.0), RadialGrid.from_extent(10.0, 200), 0.0, flat)
    state.kappa = 4.0
    with pytest.raises(SupercriticalEnergy):
        evolve_run(state, EvolveConfig(t_end=0.1))


def test_monitor_threshold_halts(pulse_state):
    result = evolve_run(pulse_state, EvolveConfig(t_end=1.0, monitor_threshold=1.0))
    assert result.halted
    assert result.steps == 1
    assert "regularity monitor" in result.halt_reason


def test_outgoing_boundary_lets_the_pulse_leave(hyperbolic):
    state0 = build_initial_state(DataProfile(A=0.1, sigma=0.5), RadialGrid.from_extent(4.0, 80), 1.0, hyperbolic)
    state = evolve_run(state0, EvolveConfig(t_end=8.0)).state
    assert energy(state) < 0.1 * energy(state0)
    undamped = evolve_run(state0, EvolveConfig(t_end=8.0, dissipation_eps=0.0)).state
    assert energy(undamped) < 0.1 * energy(state0)


@pytest.mark.parametrize("n", [80, 160])
def test_outgoing_boundary_absorbs_under_refinement(flat, n):
    state0 = build_initial_state(DataProfile(A=0.1, sigma=0.5), RadialGrid.from_extent(4.0, n), 0.0, flat)
    E0 = energy(state0)
    energies = []

    def track(state):
        energies.append(energy(state))
    evolve_run(state0, EvolveConfig(t_end=8.0, dissipation_eps=0.0), on_step=track)
    assert max(energies) <= 1.01 * E0
    assert energies[-1] < 0.05 * E0
