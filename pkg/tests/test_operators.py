import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qjump.errors import BoundaryWarning, HermiticityError, PreconditionError
from qjump.operators import (
    DensityKernel,
    GridSpec,
    StrangFlow,
    check_boundary,
    free_evolve,
    kinetic_energy,
    make_gaussian_state,
    mixed_moment,
    outer_kernel,
    position_moment,
    positivity_floor,
    pure_state,
    purity,
    schatten_norm,
    split_step_evolve,
    trace,
    zero_kernel,
)

from conftest import random_mixed

# quadrature of the closed-form packet (center 1, momentum 2, width 0.5)
GAUSS_KINETIC = 5.000000000000001
GAUSS_POSITION = 1.25
GAUSS_MIXED = 3.999999999999999


def test_grid_invariants():
    g = GridSpec(10.0, 256)
    assert g.spacing * g.n_points == 2 * g.half_width
    k = np.sort(g.momentum_nodes)
    assert np.allclose(k[1:], -k[:0:-1])
    with pytest.raises(PreconditionError):
        GridSpec(10.0, 100)
    with pytest.raises(PreconditionError):
        GridSpec(10.0, 8)


def test_separations_are_minimum_image():
    g = GridSpec(4.0, 16)
    y = g.separations
    assert y.min() >= -g.half_width and y.max() < g.half_width
    assert y[0, -1] == pytest.approx(g.spacing)


def test_gaussian_state_basics(grid, rho0):
    assert trace(rho0) == pytest.approx(1.0, abs=1e-12)
    assert purity(rho0) == pytest.approx(1.0, abs=1e-10)
    assert positivity_floor(rho0) >= -1e-12
    assert mixed_moment(rho0) == pytest.approx(0.0, abs=1e-9)
    assert position_moment(rho0) == pytest.approx(0.25, abs=1e-6)


def test_gaussian_moments_against_quadrature(grid):
    rho = make_gaussian_state(grid, 1.0, 2.0, 0.5)
    assert kinetic_energy(rho) == pytest.approx(GAUSS_KINETIC, rel=1e-8)
    assert position_moment(rho) == pytest.approx(GAUSS_POSITION, rel=1e-8)
    assert mixed_moment(rho) == pytest.approx(GAUSS_MIXED, rel=1e-8)


def test_moving_packet_energy(grid):
    rho = make_gaussian_state(grid, 0.0, 2.0, 0.5)
    assert kinetic_energy(rho) == pytest.approx(4.0 + 1.0, rel=2e-3)
    assert mixed_moment(rho) == pytest.approx(0.0, abs=1e-9)


def test_gaussian_precondition(grid):
    with pytest.raises(PreconditionError):
        make_gaussian_state(grid, 0.0, 0.0, 2.0)
    with pytest.raises(PreconditionError):
        make_gaussian_state(grid, 7.0, 0.0, 0.5)


def test_trace_linearity_and_zero(grid):
    a = make_gaussian_state(grid, -1.0, 0.0, 0.5)
    b = make_gaussian_state(grid, 1.0, 1.0, 0.7)
    assert trace(a * 0.5 + b * 0.5) == pytest.approx(1.0, abs=1e-12)
    assert trace(zero_kernel(grid)) == 0.0
    mix = a * 0.5 + b * 0.5
    assert kinetic_energy(mix) == pytest.approx(0.5 * (kinetic_energy(a) + kinetic_energy(b)), rel=1e-12)


def test_trace_rejects_complex_diagonal(grid):
    v = np.eye(grid.n_points) * (1j / (grid.spacing * grid.n_points))
    with pytest.raises(HermiticityError):
        trace(DensityKernel(grid, v))


def test_schatten_rank_one(grid):
    x = grid.positions
    phi = np.exp(-(x - 1) ** 2)
    psi = (1 + 0.5j) * np.exp(-0.5 * (x + 1) ** 2 + 1j * x)
    n1 = np.sqrt(np.sum(abs(phi) ** 2) * grid.spacing)
    n2 = np.sqrt(np.sum(abs(psi) ** 2) * grid.spacing)
    k = outer_kernel(grid, phi, psi)
    for p in (1, 1.5, 2, 4, np.inf):
        assert schatten_norm(k, p) == pytest.approx(n1 * n2, rel=1e-10)


def test_projector_difference(grid):
    x = grid.positions
    a = pure_state(grid, np.exp(-(x - 0.5) ** 2))
    b = pure_state(grid, np.exp(-((x + 0.5) ** 2) + 0.3j * x))
    phi = np.exp(-(x - 0.5) ** 2)
    psi = np.exp(-((x + 0.5) ** 2) + 0.3j * x)
    phi /= np.sqrt(np.vdot(phi, phi).real * grid.spacing)
    psi /= np.sqrt(np.vdot(psi, psi).real * grid.spacing)
    ov = abs(np.vdot(phi, psi) * grid.spacing) ** 2
    for p in (1, 2, 3):
        assert schatten_norm(a - b, p) == pytest.approx(2 ** (1 / p) * np.sqrt(1 - ov), rel=1e-9)
    assert schatten_norm(a - a, 1) == 0.0
    assert positivity_floor(a - b) < 0


def test_positive_state_trace_norm(grid):
    rho = DensityKernel(grid, random_mixed(grid, np.random.default_rng(0)))
    assert schatten_norm(rho, 1) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 6.0), st.floats(1.0, 6.0))
def test_schatten_monotone_and_holder(seed, p, q):
    g = GridSpec(8.0, 64)
    rng = np.random.default_rng(seed)
    rho = DensityKernel(g, rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64)))
    lo, hi = min(p, q), max(p, q)
    assert schatten_norm(rho, hi) <= schatten_norm(rho, lo) * (1 + 1e-12)
    r = 1 + (p - 1) / 5.0  # r in (1, 2]
    th = 2 / r - 1
    assert schatten_norm(rho, r) <= schatten_norm(rho, 1) ** th * schatten_norm(rho, 2) ** (1 - th) * (1 + 1e-12)


def test_free_evolve_group_and_invariants(grid):
    rho = DensityKernel(grid, random_mixed(grid, np.random.default_rng(1)))
    assert np.array_equal(free_evolve(rho, 0.0).values, rho.values)
    a = free_evolve(free_evolve(rho, 0.3), 0.4)
    b = free_evolve(rho, 0.7)
    assert np.max(np.abs(a.values - b.values)) < 1e-12
    assert kinetic_energy(b) == pytest.approx(kinetic_energy(rho), rel=1e-10)
    assert trace(b) == pytest.approx(1.0, abs=1e-12)
    for p in (1, 2, np.inf):
        assert schatten_norm(b, p) == pytest.approx(schatten_norm(rho, p), rel=1e-10)


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0])
def test_free_flow_trace_distance(grid, t):
    rho = DensityKernel(grid, random_mixed(grid, np.random.default_rng(2)))
    assert schatten_norm(free_evolve(rho, t) - rho, 1) <= 2 * np.sqrt(kinetic_energy(rho) * t)


def test_mixed_moment_matches_eigen_sum(grid):
    rho = DensityKernel(grid, random_mixed(grid, np.random.default_rng(3), rank=4))
    lam, vec = np.linalg.eigh(rho.values * grid.spacing)
    vec = vec / np.sqrt(grid.spacing)
    k = grid.momentum_nodes
    total = 0.0
    for l, v in zip(lam, vec.T):
        pv = np.fft.ifft(k * np.fft.fft(v))
        total += 2 * l * np.real(np.vdot(grid.positions * v, pv) * grid.spacing)
    assert mixed_moment(rho) == pytest.approx(total, abs=1e-10)
    bound = 2 * np.sqrt(position_moment(rho) * kinetic_energy(rho))
    assert abs(mixed_moment(rho)) <= bound + 1e-8


def test_split_step_reduces_to_free(grid, rho0):
    a = split_step_evolve(rho0, np.zeros(grid.n_points), 0.05)
    b = free_evolve(rho0, 0.05)
    assert np.max(np.abs(a.values - b.values)) < 1e-13
    v = split_step_evolve(rho0, np.cos(grid.positions), 0.05)
    assert trace(v) == pytest.approx(1.0, abs=1e-13)


def test_split_step_second_order():
    g = GridSpec(10.0, 128)
    rho = make_gaussian_state(g, 0.0, 1.0, 0.5)
    V = 2.0 * np.exp(-0.5 * g.positions**2)
    T = 0.8

    def run(dt):
        out = rho
        for _ in range(int(round(T / dt))):
            out = split_step_evolve(out, V, dt)
        return out.values

    ref = run(0.1 / 8)
    e1 = np.linalg.norm(run(0.1) - ref)
    e2 = np.linalg.norm(run(0.05) - ref)
    assert e1 / e2 >= 3.5


def test_strang_flow_matches_split_steps():
    g = GridSpec(10.0, 64)
    rho = make_gaussian_state(g, 0.0, 1.0, 0.5)
    V = np.exp(-0.5 * g.positions**2)
    flow = StrangFlow(g, V, 0.01)
    out = rho
    for _ in range(37):
        out = split_step_evolve(out, V, 0.01)
    out = split_step_evolve(out, V, 0.004)
    assert np.max(np.abs(flow.evolve(rho.values, 0.374) - out.values)) < 1e-12
    # binary powering path
    out2 = rho
    for _ in range(150):
        out2 = split_step_evolve(out2, V, 0.01)
    assert np.max(np.abs(flow.evolve(rho.values, 1.5) - out2.values)) < 1e-11


def test_boundary_warning():
    g = GridSpec(4.0, 32)
    rho = make_gaussian_state(g, 0.0, 0.0, 0.6)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        check_boundary(rho)
    assert any(issubclass(x.category, BoundaryWarning) for x in w)
