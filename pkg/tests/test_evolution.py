"""Time stepping: scalar decay oracle, order, dissipativity, exact duality."""

import math

import numpy as np
import pytest

from degenctrl import (ConfigError, ModeCoeffs, ModeIndex, ModelConfig,
                       TimeGrid, assemble_radial_operator, build_model,
                       coeffs_inner, evolve_mode, radial_spectrum,
                       solve_adjoint, solve_forward, solve_forward_sources,
                       time_grid_for, zero_coeffs)
from degenctrl.evolution import full_spectrum


def _scalar_march(mu, dt, steps):
    rho = (1.0 - 0.5 * dt * mu) / (1.0 + 0.5 * dt * mu)
    return rho ** steps


def test_single_mode_matches_scalar_oracle(desk_model, desk_op, desk_spec):
    # an eigenvector reduces the scheme to the scalar recurrence exactly
    mode = ModeIndex("cos", 2)
    mu = desk_spec.values[0] + 4.0
    tgrid = time_grid_for(desk_model)
    traj = evolve_mode(desk_op, mode, desk_spec.vectors[:, 0], None, tgrid)
    for k in range(tgrid.n_time + 1):
        expected = _scalar_march(mu, tgrid.dt, k) * desk_spec.vectors[:, 0]
        assert np.max(np.abs(traj.states[k] - expected)) < 1e-10


def test_dt_halving_second_order(desk_op, desk_spec):
    # error against the exact exponential shrinks by ~4 per dt halving
    mu = desk_spec.values[0]
    mode = ModeIndex("cos", 0)
    T = 0.5
    errs = []
    for n_time in (16, 32, 64):
        tgrid = TimeGrid(T, n_time)
        traj = evolve_mode(desk_op, mode, desk_spec.vectors[:, 0], None, tgrid)
        end = traj.states[-1][0] / desk_spec.vectors[0, 0]
        errs.append(abs(end - math.exp(-mu * T)))
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.8 <= coarse / fine <= 4.2


def test_energy_monotone_every_step(desk_model, desk_op, rng):
    data = rng.standard_normal((desk_model.n_modes, desk_model.n_radial))
    traj = solve_forward(desk_model, desk_op, ModeCoeffs(desk_model, data))
    norms = [traj.norm_at(k) for k in range(desk_model.config.n_time + 1)]
    for before, after in zip(norms, norms[1:]):
        assert after <= before * (1.0 + 1e-14)


def test_discrete_duality_identity(desk_model, desk_op, rng):
    # <v(T), y(T)> = dt sum <s^{k+1/2}, (y^k + y^{k+1})/2> when v starts at 0;
    # this exact identity is what makes the control Gramian symmetric
    tgrid = time_grid_for(desk_model)
    y_term = ModeCoeffs(
        desk_model,
        rng.standard_normal((desk_model.n_modes, desk_model.n_radial)))
    adjoint = solve_adjoint(desk_model, desk_op, y_term)
    sources = [rng.standard_normal((tgrid.n_time, desk_model.n_radial))
               for _ in range(desk_model.n_modes)]
    v = solve_forward_sources(desk_model, desk_op,
                              zero_coeffs(desk_model), sources)
    lhs = coeffs_inner(v.terminal_coeffs(), y_term)
    mass = desk_model.grid.mass
    rhs = 0.0
    for i in range(desk_model.n_modes):
        y_states = np.stack([adjoint.coeffs_at(k).data[i]
                             for k in range(tgrid.n_time + 1)])
        mid = 0.5 * (y_states[:-1] + y_states[1:])
        rhs += tgrid.dt * float(np.sum(sources[i] * mid * mass[None, :]))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-13)


def test_adjoint_is_time_reversed_forward(desk_model, desk_op, rng):
    y_term = ModeCoeffs(
        desk_model,
        rng.standard_normal((desk_model.n_modes, desk_model.n_radial)))
    adjoint = solve_adjoint(desk_model, desk_op, y_term)
    forward = solve_forward(desk_model, desk_op, y_term)
    n = desk_model.config.n_time
    for k in (0, n // 3, n):
        assert np.max(np.abs(adjoint.coeffs_at(k).data
                             - forward.coeffs_at(n - k).data)) < 1e-13


def test_grid_control_matches_projected_sources(desk_model, desk_op, rng):
    # dual entry points for sources: grid samples vs per-mode rows
    tgrid = time_grid_for(desk_model)
    q = desk_model.config.theta_quad_points
    control = rng.standard_normal((tgrid.n_time, q, desk_model.n_radial))
    phi0 = ModeCoeffs(
        desk_model,
        rng.standard_normal((desk_model.n_modes, desk_model.n_radial)))
    a = solve_forward(desk_model, desk_op, phi0, control_values=control)
    proj = np.einsum("qm,tqr->mtr", desk_model.basis_matrix,
                     control) * desk_model.theta_weight
    b = solve_forward_sources(desk_model, desk_op, phi0,
                              [proj[i] for i in range(desk_model.n_modes)])
    assert np.max(np.abs(a.terminal_coeffs().data
                         - b.terminal_coeffs().data)) < 1e-12


def test_source_shape_validated(desk_model, desk_op):
    tgrid = time_grid_for(desk_model)
    bad = [np.zeros((tgrid.n_time + 1, desk_model.n_radial))
           for _ in range(desk_model.n_modes)]
    with pytest.raises(ConfigError):
        solve_forward_sources(desk_model, desk_op,
                              zero_coeffs(desk_model), bad)
    with pytest.raises(ConfigError):
        solve_forward_sources(desk_model, desk_op, zero_coeffs(desk_model),
                              [np.zeros((tgrid.n_time, desk_model.n_radial))])


def test_full_spectrum_sorted_and_complete(meas_model, meas_full_spec):
    bound = 60.0
    recs = full_spectrum(meas_model, bound)
    vals = [r[3] for r in recs]
    assert vals == sorted(vals)
    assert all(v <= bound for v in vals)
    # cross-check against the dense spectrum plus angular shifts
    expected = []
    for m in meas_model.modes:
        for lam in meas_full_spec.values:
            v = lam + m.n ** 2
            if v <= bound:
                expected.append(v)
    expected.sort()
    assert len(recs) == len(expected)
    assert np.allclose(vals, expected, rtol=1e-10)


def test_time_grid_validation():
    with pytest.raises(ConfigError):
        TimeGrid(0.0, 8)
    with pytest.raises(ConfigError):
        TimeGrid(1.0, 1)
    tg = TimeGrid(2.0, 10)
    assert tg.dt == pytest.approx(0.2)
    assert tg.nodes.size == 11
    assert tg.half_nodes.size == 10
    assert np.allclose(tg.half_nodes, tg.nodes[:-1] + 0.1)
