import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qjump.collision import (
    BathParams,
    collision_apply,
    collision_multiplier,
    compensating_potential,
    gamma_commutator,
    gamma_inf_eval,
    gamma_inf_kernel,
    half_erfc,
    theta_inf,
    theta_inf_multiplier,
    theta_p,
    theta_p_multiplier,
)
from qjump.errors import InvalidParameterError
from qjump.operators import DensityKernel, GridSpec, kinetic_energy, positivity_floor, schatten_norm, trace

from conftest import random_mixed

# dblquad over x uniform on [-4, 4] and thermal p (beta0 = 2)
GAMMA_INF_ORACLE = {0.0: 0.22154269740955201, 1.5: 0.22018093400348582, 4.0: 0.11077836568159463}
# quad of (1/2) sqrt(beta0/(8-beta0)) int (gamma(X-x) - gamma(X'-x))^2 dx
GAMMA_KERNEL_ORACLE = {(0.0, 1.0): 0.22635370331317547, (2.0, -3.0): 0.9799123906915643, (5.0, 4.5): 0.024076571756348086}


def test_params_validation():
    with pytest.raises(InvalidParameterError, match=r"beta0 must lie in \(0,4\)"):
        BathParams(beta0=5)
    with pytest.raises(InvalidParameterError, match="rate must exceed alpha²"):
        BathParams(alpha=2, rate=1)
    with pytest.raises(InvalidParameterError):
        BathParams(sign=0)
    p = BathParams(beta0=2.0)
    assert 1 / p.beta0 == pytest.approx(1 / p.beta + 1 / 4)


@pytest.mark.parametrize("beta0", [0.5, 2.0, 3.5])
@pytest.mark.parametrize("y", [0.3, 1.0, 1.7])
def test_theta_inf_is_thermal_average(beta0, y):
    beta = BathParams(beta0=beta0).beta
    dens = lambda p: np.sqrt(beta / (2 * np.pi)) * np.exp(-beta * p * p / 2)
    re = integrate.quad(lambda p: (theta_p(y, p) * dens(p)).real, -np.inf, np.inf)[0]
    im = integrate.quad(lambda p: (theta_p(y, p) * dens(p)).imag, -np.inf, np.inf)[0]
    assert re == pytest.approx(theta_inf(y, beta0), rel=1e-10)
    assert abs(im) < 1e-12


def test_half_erfc_convention():
    assert half_erfc(0.0) == 0.5
    val = integrate.quad(lambda y: np.exp(-y * y), 0.7, np.inf)[0] / np.sqrt(np.pi)
    assert half_erfc(0.7) == pytest.approx(val, rel=1e-12)


@pytest.mark.parametrize("X", sorted(GAMMA_INF_ORACLE))
def test_gamma_inf_against_quadrature(X):
    assert gamma_inf_eval(X, BathParams()) == pytest.approx(GAMMA_INF_ORACLE[X], rel=1e-10)


def test_gamma_inf_kernel_against_quadrature():
    g = GridSpec(8.0, 32)  # grid points at multiples of 0.5
    K = gamma_inf_kernel(g, BathParams()).values
    x = g.positions
    for (X, Xp), ref in GAMMA_KERNEL_ORACLE.items():
        i, j = np.argmin(abs(x - X)), np.argmin(abs(x - Xp))
        assert K[i, j] == pytest.approx(ref, rel=1e-10)
    assert np.all(np.diagonal(K) == 0) and np.all(K >= 0)


def test_multiplier_diagonals(grid):
    p = BathParams()
    assert np.all(np.diagonal(theta_p_multiplier(grid, 0.7).values) == 1)
    assert np.all(np.diagonal(theta_inf_multiplier(grid, p).values) == 1)
    m = collision_multiplier(grid, 0.3, -1.0, p)
    assert np.all(np.diagonal(m) == 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(-4, 4), st.sampled_from([1, -1]), st.floats(1.5, 50))
def test_collision_multiplier_is_psd(p, x, sign, rate):
    g = GridSpec(10.0, 64)
    m = collision_multiplier(g, p, x, BathParams(rate=rate, sign=sign))
    assert np.max(np.abs(m - m.conj().T)) < 1e-14
    assert np.linalg.eigvalsh(m)[0] >= -1e-10 * g.n_points


def test_collision_structure(grid):
    rng = np.random.default_rng(5)
    params = BathParams(rate=25)
    for _ in range(20):
        rho = DensityKernel(grid, random_mixed(grid, rng, rank=int(rng.integers(1, 5))))
        p, x = rng.normal(0, 0.5), rng.uniform(-4, 4)
        out = collision_apply(rho, p, x, params)
        assert trace(out) == pytest.approx(1.0, abs=1e-13)
        assert out.hermiticity_defect() <= 1e-12
        assert positivity_floor(out) >= -1e-9
        a = params.alpha**2 / params.rate
        bound = 2 * (a + np.sqrt(a) * np.exp(-2 * p * p))
        for q in (1, 2):
            assert schatten_norm(out - rho, q) <= bound * schatten_norm(rho, q) + 1e-12


def test_collision_kinetic_change_bound(grid):
    # single-collision kinetic bound, with |p| in place of p
    rng = np.random.default_rng(6)
    for N in (4.0, 25.0, 400.0):
        params = BathParams(rate=N)
        for _ in range(10):
            rho = DensityKernel(grid, random_mixed(grid, rng))
            p, x = rng.normal(0, 1.0), rng.uniform(-4, 4)
            K = kinetic_energy(rho)
            dK = abs(kinetic_energy(collision_apply(rho, p, x, params)) - K)
            al = params.alpha
            rhs = (al + al**2) / np.sqrt(N) * (1 + 8 * abs(p)) * np.sqrt(K) + al**2 / N * (1 + 2 * p * p)
            assert dK <= rhs


def test_compensating_potential_cancels_mean_commutator(grid):
    # E_{x,p}[N b(p) gamma(.-x)] equals the potential, so the mean drift of the
    # imaginary collision term is exactly undone by the potential
    params = BathParams(rate=50)
    beta, R = params.beta, params.cutoff
    X = grid.positions[::32]
    a = params.alpha**2 / params.rate
    mean = []
    for Xi in X:
        f = lambda p, x: (
            np.exp(-2 * p * p) * np.exp(-0.5 * (Xi - x) ** 2) * np.sqrt(beta / (2 * np.pi)) * np.exp(-beta * p * p / 2) / (2 * R)
        )
        mean.append(integrate.dblquad(f, -R, R, -np.inf, np.inf, epsabs=1e-13)[0])
    expected = params.rate * np.sqrt(a) * np.sqrt(1 - a) * np.array(mean)
    assert np.allclose(compensating_potential(grid, params)[::32], expected, rtol=1e-9, atol=1e-12)


def test_gamma_commutator_traceless(grid, rho0):
    c = gamma_commutator(rho0, 0.5)
    assert abs(np.trace(c.values)) < 1e-15
