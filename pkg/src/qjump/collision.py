"""Collision super-operator and the bath-averaged multipliers.

All maps here act on kernels by entrywise multiplication
``rho(X, X') -> m(X, X') rho(X, X')``.  Light particles are Gaussian packets of
unit spread; ``gamma(X) = exp(-X^2/2)`` and ``theta_p(Y) = exp(2ipY - Y^2/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import erfc, roots_legendre

from .errors import InvalidParameterError
from .operators import DensityKernel, GridSpec

GL_NODES = 128


@dataclass(frozen=True)
class BathParams:
    """Physical constants of the thermal bath.

    ``beta`` is derived from ``1/beta0 = 1/beta + 1/4`` (unit light-particle
    spread).  ``sign`` picks the branch of the imaginary collision term and the
    matching compensating potential.
    """

    alpha: float = 1.0
    cutoff: float = 4.0
    beta0: float = 2.0
    rate: float = 200.0
    sign: int = 1

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidParameterError("alpha must be non-negative")
        if not self.cutoff > 0:
            raise InvalidParameterError("cutoff must be positive")
        if not 0 < self.beta0 < 4:
            raise InvalidParameterError("beta0 must lie in (0,4)")
        if not self.rate > self.alpha**2:
            raise InvalidParameterError("rate must exceed alpha²")
        if self.sign not in (1, -1):
            raise InvalidParameterError("sign must be +1 or -1")
        for name in ("alpha", "cutoff", "beta0", "rate"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "sign", int(self.sign))

    @property
    def beta(self) -> float:
        return 4.0 * self.beta0 / (4.0 - self.beta0)

    @property
    def momentum_variance(self) -> float:
        return 1.0 / self.beta

    @property
    def potential_amplitude(self) -> float:
        """Signed prefactor of the compensating potential, ``+-alpha sqrt(N - alpha^2)``."""
        return self.sign * self.alpha * np.sqrt(self.rate - self.alpha**2)


@dataclass(frozen=True, eq=False)
class KernelMultiplier:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values.flags.writeable = False

    def apply(self, rho: DensityKernel) -> DensityKernel:
        return DensityKernel._wrap(rho.grid, rho.values * self.values)

    __call__ = apply


def gamma(x):
    return np.exp(-0.5 * np.asarray(x) ** 2)


def half_erfc(x):
    """``(1/sqrt(pi)) * int_x^inf exp(-y^2) dy``, half the usual complementary error function."""
    return 0.5 * erfc(x)


def theta_p(y, p: float):
    y = np.asarray(y)
    return np.exp(2j * p * y - 0.5 * y**2)


def theta_inf(y, beta0: float):
    return np.exp(-2.0 * np.asarray(y) ** 2 / beta0)


@lru_cache(maxsize=16)
def _gaussian_separation(grid: GridSpec) -> np.ndarray:
    g = np.exp(-0.5 * grid.separations**2)
    g.flags.writeable = False
    return g


def _theta_p_values(grid: GridSpec, p: float) -> np.ndarray:
    # exp(2ip(X - X')) factorises, so only n complex exponentials are needed;
    # entries across the seam pick up the phase of one period
    e = np.exp(2j * p * grid.positions)
    v = _gaussian_separation(grid) * e[:, None] * e.conj()[None, :]
    c = np.exp(4j * p * grid.half_width)
    return v * np.array([np.conj(c), 1.0, c])[grid.wraps + 1]


def theta_p_multiplier(grid: GridSpec, p: float) -> KernelMultiplier:
    v = _theta_p_values(grid, float(p))
    np.fill_diagonal(v, 1.0)
    return KernelMultiplier(grid, v)


@lru_cache(maxsize=16)
def _theta_inf_values(grid: GridSpec, beta0: float) -> np.ndarray:
    v = theta_inf(grid.separations, beta0)
    v.flags.writeable = False
    return v


def theta_inf_multiplier(grid: GridSpec, params: BathParams) -> KernelMultiplier:
    return KernelMultiplier(grid, _theta_inf_values(grid, params.beta0))


def gamma_commutator(rho: DensityKernel, x: float) -> DensityKernel:
    """Kernel of ``i (gamma(. - x) rho - rho gamma(. - x))``."""
    g = gamma(rho.grid.positions - x)
    return DensityKernel._wrap(rho.grid, 1j * (g[:, None] - g[None, :]) * rho.values)


def collision_multiplier(grid: GridSpec, p: float, x: float, params: BathParams) -> np.ndarray:
    a = params.alpha**2 / params.rate
    b = params.sign * np.sqrt(a) * np.sqrt(1.0 - a) * np.exp(-2.0 * p * p)
    g = gamma(grid.positions - x)
    m = a * _theta_p_values(grid, p)
    m += 1.0 - a
    m += 1j * b * (g[:, None] - g[None, :])
    # exact 1 on the diagonal keeps the trace bit-for-bit
    np.fill_diagonal(m, 1.0)
    return m


def collision_apply(rho: DensityKernel, p: float, x: float, params: BathParams) -> DensityKernel:
    """One instantaneous collision with a light particle of momentum ``p`` at ``x``.

    The multiplier matrix is positive semidefinite, so by the Schur product
    theorem the map is completely positive; it is trace preserving because the
    multiplier is 1 on the diagonal.
    """
    if not params.rate > params.alpha**2:
        raise InvalidParameterError("rate must exceed alpha²")
    return DensityKernel._wrap(rho.grid, rho.values * collision_multiplier(rho.grid, p, x, params))


def gamma_inf_eval(X, params: BathParams):
    """Bath-averaged collision profile ``E_{x,p}[exp(-2p^2) gamma(X - x)]``.

    ``x`` is uniform on ``[-R, R]`` and ``p`` is the thermal momentum; the
    compensating potential is ``potential_amplitude * gamma_inf_eval``.
    """
    X = np.asarray(X, dtype=float)
    R = params.cutoff
    pref = np.sqrt(2.0 * np.pi * params.beta0) / (4.0 * R)
    return pref * (half_erfc((X - R) / np.sqrt(2.0)) - half_erfc((X + R) / np.sqrt(2.0)))


def compensating_potential(grid: GridSpec, params: BathParams) -> np.ndarray:
    return params.potential_amplitude * gamma_inf_eval(grid.positions, params)


@lru_cache(maxsize=16)
def _gamma_inf_kernel_values(grid: GridSpec, cutoff: float, beta0: float) -> np.ndarray:
    nodes, weights = roots_legendre(GL_NODES)
    nodes = cutoff * nodes
    weights = cutoff * weights
    G = gamma(grid.positions[:, None] - nodes[None, :])
    n = grid.n_points
    out = np.empty((n, n))
    # direct squared differences: the expanded form cancels badly far from [-R, R]
    block = max(1, 2_000_000 // (n * GL_NODES))
    for i0 in range(0, n, block):
        d = G[i0 : i0 + block, None, :] - G[None, :, :]
        out[i0 : i0 + block] = (d * d) @ weights
    out *= 0.5 * np.sqrt(beta0 / (8.0 - beta0))
    np.fill_diagonal(out, 0.0)
    out = 0.5 * (out + out.T)
    out.flags.writeable = False
    return out


def gamma_inf_kernel(grid: GridSpec, params: BathParams) -> KernelMultiplier:
    """``(1/2) sqrt(beta0/(8-beta0)) int_{-R}^{R} (gamma(X-x) - gamma(X'-x))^2 dx``.

    Zero on the diagonal, positive elsewhere; Gauss-Legendre with 128 nodes.
    """
    return KernelMultiplier(grid, _gamma_inf_kernel_values(grid, params.cutoff, params.beta0))
