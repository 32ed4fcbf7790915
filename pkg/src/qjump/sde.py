"""Limit stochastic Lindblad equation driven by a correlated Brownian potential.

The potential increment is ``dW(X) = sign * kappa * sum_j sqrt(w_j) gamma(X - x_j) dB_j``
over Gauss-Legendre nodes ``x_j`` on ``[-R, R]``.  Since the commutator with a
multiplication operator acts entrywise on kernels, both schemes reduce to an
entrywise multiplier sandwiched between exact free half steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import erf, roots_legendre

from .annealed import decoherence_exponent
from .collision import BathParams, _gamma_inf_kernel_values, gamma
from .environment import RngStream
from .errors import PreconditionError
from .jump import TrajectoryResult, _validated_times, record_checked
from .operators import (
    DEFAULT_TOLERANCES,
    DensityKernel,
    GridSpec,
    Tolerances,
    _free_values,
    check_boundary,
)

SCHEMES = ("ito", "stratonovich")


def noise_kappa(params: BathParams) -> float:
    b = params.beta0
    return params.alpha / np.sqrt(2.0 * params.cutoff) * (b / (8.0 - b)) ** 0.25


@dataclass(frozen=True, eq=False)
class NoiseModel:
    params: BathParams
    grid: GridSpec
    kappa: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @cached_property
    def covariance(self) -> np.ndarray:
        """``basis @ basis.T``; covariance of ``W_1`` on the grid."""
        return self.basis @ self.basis.T

    @cached_property
    def difference_variance(self) -> np.ndarray:
        """Per unit time variance of ``W(X) - W(X')``; zero on the diagonal."""
        c = self.covariance
        d = np.diagonal(c)
        v = d[:, None] + d[None, :] - 2.0 * c
        np.fill_diagonal(v, 0.0)
        return np.maximum(v, 0.0)


@dataclass(frozen=True, eq=False)
class NoiseIncrement:
    xi: np.ndarray
    dt: float
    field: np.ndarray = field(repr=False)


def build_noise_model(grid: GridSpec, params: BathParams, n_nodes: int = 64) -> NoiseModel:
    if n_nodes < 32:
        raise PreconditionError("n_nodes must be at least 32")
    t, w = roots_legendre(int(n_nodes))
    R = params.cutoff
    nodes, weights = R * t, R * w
    kappa = noise_kappa(params)
    basis = kappa * np.sqrt(weights)[None, :] * gamma(grid.positions[:, None] - nodes[None, :])
    for a in (nodes, weights, basis):
        a.flags.writeable = False
    return NoiseModel(params, grid, float(kappa), nodes, weights, basis)


def make_increment(noise: NoiseModel, xi: np.ndarray, dt: float) -> NoiseIncrement:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (noise.n_nodes,):
        raise PreconditionError("one normal per quadrature node is required")
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    return NoiseIncrement(xi, float(dt), np.sqrt(dt) * (noise.basis @ xi))


def sample_increment(noise: NoiseModel, dt: float, gen: np.random.Generator) -> NoiseIncrement:
    return make_increment(noise, gen.standard_normal(noise.n_nodes), dt)


def coarsen_normals(xi: np.ndarray) -> np.ndarray:
    """Merge consecutive pairs of step normals into normals for a doubled step."""
    xi = np.asarray(xi)
    if xi.shape[0] % 2:
        raise PreconditionError("need an even number of steps to coarsen")
    return (xi[0::2] + xi[1::2]) / np.sqrt(2.0)


# -- covariance closed forms -------------------------------------------------------------


def _erf_window(m, R):
    return 0.5 * np.sqrt(np.pi) * (erf(R - m) + erf(R + m))


def factorized_covariance(X, Xp, params: BathParams):
    """``kappa^2 int_{-R}^{R} gamma(X-x) gamma(X'-x) dx`` in closed form."""
    X, Xp = np.asarray(X, float), np.asarray(Xp, float)
    k2 = noise_kappa(params) ** 2
    return k2 * np.exp(-0.25 * (X - Xp) ** 2) * _erf_window(0.5 * (X + Xp), params.cutoff)


def printed_covariance(X, Xp, params: BathParams):
    """Variant with Gaussian factor ``exp(-(X-X')^2/2)`` in place of ``/4``."""
    X, Xp = np.asarray(X, float), np.asarray(Xp, float)
    k2 = noise_kappa(params) ** 2
    return k2 * np.exp(-0.5 * (X - Xp) ** 2) * _erf_window(0.5 * (X + Xp), params.cutoff)


def exponent_denominator(cov, X, Xp, params: BathParams) -> float:
    """Solve ``cov = kappa^2 exp(-(X-X')^2/c) window`` for ``c``; 4 for the factorized law."""
    k2 = noise_kappa(params) ** 2
    ratio = cov / (k2 * _erf_window(0.5 * (X + Xp), params.cutoff))
    return float(-((X - Xp) ** 2) / np.log(ratio))


# -- steps ------------------------------------------------------------------------------


def _ito_multiplier(grid, inc: NoiseIncrement, params: BathParams, noise: NoiseModel) -> np.ndarray:
    f = inc.field
    d = params.sign * (f[:, None] - f[None, :])
    drift = -inc.dt * decoherence_exponent(grid, params)
    # Milstein term for the commuting entrywise noise: -(D^2 - E[D^2]) / 2
    return 1.0 - 1j * d + drift - 0.5 * (d * d - inc.dt * noise.difference_variance)


def strat_drift(grid: GridSpec, params: BathParams) -> np.ndarray:
    """Entrywise Stratonovich drift ``alpha^2 (theta_inf - 1) + (alpha^2 / 2R) gamma_inf``."""
    g = _gamma_inf_kernel_values(grid, params.cutoff, params.beta0)
    return -decoherence_exponent(grid, params) + params.alpha**2 / (2.0 * params.cutoff) * g


def _strat_multiplier(grid, inc: NoiseIncrement, params: BathParams) -> np.ndarray:
    f = inc.field
    z = inc.dt * strat_drift(grid, params) - 1j * params.sign * (f[:, None] - f[None, :])
    # Heun on the linear entrywise equation: 1 + z + z^2/2
    return 1.0 + z * (1.0 + 0.5 * z)


def _multiplier(grid, inc, params, noise, scheme):
    if scheme == "ito":
        return _ito_multiplier(grid, inc, params, noise)
    return _strat_multiplier(grid, inc, params)


def _step_values(grid, values, inc, params, noise, scheme, hamiltonian):
    h = 0.5 * inc.dt
    v = _free_values(grid, values, h) if hamiltonian else values
    v = v * _multiplier(grid, inc, params, noise, scheme)
    return _free_values(grid, v, h) if hamiltonian else v


def _advance(grid, values, increments, params, noise, scheme, hamiltonian):
    """Equal steps with the free half steps between consecutive updates merged."""
    incs = list(increments)
    if not incs:
        return values
    h = incs[0].dt
    v = _free_values(grid, values, 0.5 * h) if hamiltonian else values
    for i, inc in enumerate(incs):
        v = v * _multiplier(grid, inc, params, noise, scheme)
        if hamiltonian:
            v = _free_values(grid, v, h if i < len(incs) - 1 else 0.5 * h)
    return v


def ito_step(
    rho: DensityKernel, inc: NoiseIncrement, params: BathParams, noise: NoiseModel, *, hamiltonian: bool = True
) -> DensityKernel:
    """Free half step, Milstein update of the Itô form, free half step."""
    return DensityKernel._wrap(rho.grid, _step_values(rho.grid, rho.values, inc, params, noise, "ito", hamiltonian))


def strat_step(
    rho: DensityKernel, inc: NoiseIncrement, params: BathParams, noise: NoiseModel | None = None, *, hamiltonian: bool = True
) -> DensityKernel:
    """Free half step, Heun update of the Stratonovich form, free half step."""
    return DensityKernel._wrap(
        rho.grid, _step_values(rho.grid, rho.values, inc, params, noise, "stratonovich", hamiltonian)
    )


def integrate_normals(
    rho0: DensityKernel,
    params: BathParams,
    noise: NoiseModel,
    xis: np.ndarray,
    dt: float,
    scheme: str,
    *,
    hamiltonian: bool = True,
) -> DensityKernel:
    """Run ``len(xis)`` steps of size ``dt`` with prescribed step normals."""
    if scheme not in SCHEMES:
        raise PreconditionError(f"unknown scheme {scheme!r}")
    grid = rho0.grid
    incs = (make_increment(noise, xi, dt) for xi in np.asarray(xis))
    v = _advance(grid, np.array(rho0.values), incs, params, noise, scheme, hamiltonian)
    return DensityKernel._wrap(grid, v)


def simulate_sde_trajectory(
    rho0: DensityKernel,
    params: BathParams,
    sample_times,
    dt: float = 1e-3,
    scheme: str = "ito",
    rng: RngStream | None = None,
    *,
    noise: NoiseModel | None = None,
    n_nodes: int = 64,
    keep_snapshots: bool = False,
    hamiltonian: bool = True,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> TrajectoryResult:
    """One path of the limit equation.

    Each gap between sample times is split into equal steps no longer than
    ``dt``; one standard normal per quadrature node is drawn per step.
    """
    if scheme not in SCHEMES:
        raise PreconditionError(f"unknown scheme {scheme!r}")
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    ts = _validated_times(sample_times)
    rng = rng if rng is not None else RngStream(0, 0)
    grid = rho0.grid
    noise = noise if noise is not None else build_noise_model(grid, params, n_nodes)
    gen = rng.generator()
    v = np.array(rho0.values, dtype=np.complex128)
    t = 0.0
    records, snaps = [], []
    diag = {"seed": rng.seed, "stream_id": rng.stream_id, "scheme": scheme}
    for s in ts:
        tau = s - t
        if tau > 0:
            m = int(np.ceil(tau / dt - 1e-9))
            h = tau / m
            incs = (sample_increment(noise, h, gen) for _ in range(m))
            v = _advance(grid, v, incs, params, noise, scheme, hamiltonian)
        t = float(s)
        records.append(record_checked(grid, v, t, tolerances, diag))
        snap = DensityKernel._wrap(grid, v.copy())
        check_boundary(snap, tolerances)
        if keep_snapshots:
            snaps.append(snap)
    return TrajectoryResult(
        params=params,
        sample_times=ts,
        records=records,
        snapshots=snaps if keep_snapshots else None,
        rng=rng,
        scheme=f"sde-{'ito' if scheme == 'ito' else 'strat'}",
    )
