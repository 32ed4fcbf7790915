import numpy as np
import pytest

from qjump.annealed import decoherence_exponent, dissipative_step, predicted_moments, solve_annealed
from qjump.collision import BathParams, theta_inf
from qjump.errors import PreconditionError
from qjump.operators import (
    GridSpec,
    free_evolve,
    kinetic_energy,
    make_gaussian_state,
    position_moment,
    positivity_floor,
    schatten_norm,
)


def test_zero_coupling_is_free_flow(grid, rho0):
    out = solve_annealed(rho0, BathParams(alpha=0.0), [0.3, 1.1], dt=0.05)
    for t, s in zip(out.times, out.states):
        assert schatten_norm(s - free_evolve(rho0, t), 2) < 1e-12


def test_decoherence_is_exact_without_kinetic_term(grid, params):
    rho = make_gaussian_state(grid, 0.0, 1.0, 1.0)
    t = 0.8
    out = solve_annealed(rho, params, [t], dt=0.01, hamiltonian=False).states[-1]
    y = grid.separations
    expected = rho.values * np.exp(-t * params.alpha**2 * (1 - theta_inf(y, params.beta0)))
    assert np.max(np.abs(out.values - expected)) < 1e-12
    assert schatten_norm(out - dissipative_step(rho, params, t), 2) < 1e-12


def test_exponent_vanishes_on_diagonal(grid, params):
    r = decoherence_exponent(grid, params)
    assert np.all(np.diagonal(r) == 0) and np.all(r >= 0)
    assert np.max(r) <= params.alpha**2


def test_kinetic_law(grid, params, rho0):
    ts = [0.5, 1.0, 2.0]
    out = solve_annealed(rho0, params, ts, dt=1e-3)
    for t, rec in zip(ts, out.records):
        k_pred, _ = predicted_moments(rho0, params, t)
        assert rec.kinetic_energy == pytest.approx(k_pred, rel=1e-4)
        assert rec.trace == pytest.approx(1.0, abs=1e-12)
    assert positivity_floor(out.states[-1]) > -1e-10


def test_position_law_on_wide_box(params):
    g = GridSpec(20.0, 512)
    rho = make_gaussian_state(g, 0.0, 0.0, 0.5)
    out = solve_annealed(rho, params, [1.0, 2.0], dt=1e-3)
    for t, rec in zip(out.times, out.records):
        _, q_pred = predicted_moments(rho, params, t)
        assert rec.position_moment == pytest.approx(q_pred, rel=1e-3)


def test_predicted_moments_values(grid, params, rho0):
    k0, q0 = kinetic_energy(rho0), position_moment(rho0)
    k, q = predicted_moments(rho0, params, 1.5)
    assert k - k0 == pytest.approx(3.0, rel=1e-14)
    assert q == pytest.approx(q0 + k0 * 2.25 + 2.25, rel=1e-12)


def test_bad_time_grids(rho0, params):
    with pytest.raises(PreconditionError):
        solve_annealed(rho0, params, [1.0, 0.5])
    with pytest.raises(PreconditionError):
        solve_annealed(rho0, params, [1.0], dt=0.0)


def test_second_order_in_time(params):
    g = GridSpec(10.0, 128)
    rho = make_gaussian_state(g, 0.5, 1.0, 0.6)
    ref = solve_annealed(rho, params, [1.0], dt=1 / 640).states[-1]
    errs = [schatten_norm(solve_annealed(rho, params, [1.0], dt=h).states[-1] - ref, 2) for h in (0.1, 0.05)]
    assert errs[0] / errs[1] >= 3.5
