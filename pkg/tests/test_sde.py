import numpy as np
import pytest

from qjump.annealed import decoherence_exponent
from qjump.collision import BathParams, gamma_inf_kernel
from qjump.environment import RngStream
from qjump.errors import PreconditionError
from qjump.operators import GridSpec, free_evolve, make_gaussian_state, schatten_norm
from qjump.sde import (
    build_noise_model,
    coarsen_normals,
    exponent_denominator,
    factorized_covariance,
    integrate_normals,
    ito_step,
    make_increment,
    noise_kappa,
    printed_covariance,
    simulate_sde_trajectory,
    strat_drift,
    strat_step,
)

# kappa^2 int_{-R}^{R} gamma(X-x) gamma(X'-x) dx by adaptive quadrature
COV_ORACLE = {
    (0.0, 0.0): 0.12791583652119956,
    (0.0, 1.0): 0.09962091816194761,
    (2.0, -1.0): 0.013482225175738596,
    (3.5, 3.0): 0.10281120105305888,
    (-1.0, -2.5): 0.07283094328547217,
}


@pytest.fixture(scope="module")
def probe():
    g = GridSpec(8.0, 32)
    return g, build_noise_model(g, BathParams(), 64)


def test_kappa_value():
    assert noise_kappa(BathParams()) == pytest.approx(0.26864248295588544, rel=1e-15)


def test_covariance_against_quadrature(probe):
    g, noise = probe
    x = g.positions
    idx = lambda v: int(np.argmin(abs(x - v)))
    p = noise.params
    for (X, Xp), ref in COV_ORACLE.items():
        assert noise.covariance[idx(X), idx(Xp)] == pytest.approx(ref, rel=1e-9)
        assert factorized_covariance(X, Xp, p) == pytest.approx(ref, rel=1e-12)
        if X != Xp:
            assert exponent_denominator(ref, X, Xp, p) == pytest.approx(4.0, rel=1e-8)
            assert abs(printed_covariance(X, Xp, p) - ref) > 1e-3 * ref


def test_ito_correction_matches_stratonovich_drift():
    g = GridSpec(10.0, 64)
    p = BathParams()
    noise = build_noise_model(g, p, 128)
    half_var = 0.5 * noise.difference_variance
    lift = p.alpha**2 / (2 * p.cutoff) * gamma_inf_kernel(g, p).values
    assert np.max(np.abs(half_var - lift)) < 1e-9
    assert np.allclose(strat_drift(g, p), -decoherence_exponent(g, p) + lift)
    assert np.all(strat_drift(g, p) >= -decoherence_exponent(g, p))


def test_node_count_guard(probe):
    g, noise = probe
    with pytest.raises(PreconditionError):
        build_noise_model(g, noise.params, 16)
    with pytest.raises(PreconditionError):
        make_increment(noise, np.zeros(3), 0.1)


@pytest.mark.parametrize("step", [ito_step, strat_step])
def test_steps_preserve_trace_and_hermiticity(step):
    g = GridSpec(16.0, 128)
    p = BathParams()
    noise = build_noise_model(g, p)
    rho = make_gaussian_state(g, 0.3, 0.5, 0.7)
    gen = np.random.default_rng(0)
    for _ in range(5):
        inc = make_increment(noise, gen.standard_normal(noise.n_nodes), 1e-2)
        rho = step(rho, inc, p, noise)
        assert np.trace(rho.values).real * g.spacing == pytest.approx(1.0, abs=1e-13)
        assert rho.hermiticity_defect() < 1e-13


@pytest.mark.parametrize("scheme", ["ito", "stratonovich"])
def test_zero_coupling_is_free_flow(scheme):
    g = GridSpec(16.0, 128)
    p = BathParams(alpha=0.0)
    rho = make_gaussian_state(g, 0.0, 1.0, 0.5)
    res = simulate_sde_trajectory(rho, p, [0.4], dt=0.05, scheme=scheme, keep_snapshots=True)
    assert schatten_norm(res.snapshots[-1] - free_evolve(rho, 0.4), 2) < 1e-12


def test_schemes_agree_as_step_shrinks():
    g = GridSpec(16.0, 128)
    p = BathParams()
    noise = build_noise_model(g, p)
    rho = make_gaussian_state(g, 0.0, 0.0, 0.5)
    gen = np.random.default_rng(4)
    xi = gen.standard_normal((256, noise.n_nodes))
    gaps = []
    for level in range(3):
        dt = 0.5 / xi.shape[0]
        a = integrate_normals(rho, p, noise, xi, dt, "ito")
        b = integrate_normals(rho, p, noise, xi, dt, "stratonovich")
        gaps.append(schatten_norm(a - b, 2))
        xi = coarsen_normals(xi)
    # finest first; each coarsening should widen the gap
    assert gaps[0] < gaps[1] < gaps[2]
    assert gaps[0] < 5e-3


def test_trajectory_determinism_and_scheme_label():
    g = GridSpec(16.0, 128)
    rho = make_gaussian_state(g, 0.0, 0.0, 0.5)
    p = BathParams()
    a = simulate_sde_trajectory(rho, p, [0.1, 0.2], dt=0.01, rng=RngStream(5, 1))
    b = simulate_sde_trajectory(rho, p, [0.1, 0.2], dt=0.01, rng=RngStream(5, 1))
    s = simulate_sde_trajectory(rho, p, [0.1], dt=0.01, scheme="stratonovich", rng=RngStream(5, 1))
    assert a.records == b.records
    assert a.scheme == "sde-ito" and s.scheme == "sde-strat"
    with pytest.raises(PreconditionError):
        simulate_sde_trajectory(rho, p, [0.1], scheme="euler")
