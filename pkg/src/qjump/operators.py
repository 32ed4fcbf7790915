"""Density-operator kernels on a periodic position grid.

Scaling convention (used everywhere in the package): a kernel matrix ``v``
with ``v[i, j] ~ rho(X_i, X_j)`` represents the operator ``spacing * v``.
Traces, Schatten norms and moments computed here therefore approximate their
continuum values on L^2(R) as long as the state stays away from the box edge.

The momentum operator is ``P = -i d/dX`` and the free Hamiltonian is
``H0 = P^2 / 2``; the free flow is ``rho_t = exp(-i t H0) rho exp(i t H0)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import BoundaryWarning, HermiticityError, PreconditionError


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-12
    trace: float = 1e-10
    positivity: float = 1e-9
    breakdown: float = 1e-6
    boundary_mass: float = 1e-12
    boundary_points: int = 3


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid ``X_i = -L + i * spacing`` covering ``[-L, L)``."""

    half_width: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise PreconditionError(f"n_points must be a power of two >= 16, got {n!r}")
        if not self.half_width > 0:
            raise PreconditionError(f"half_width must be positive, got {self.half_width!r}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def momentum_spacing(self) -> float:
        return np.pi / self.half_width

    @cached_property
    def positions(self) -> np.ndarray:
        x = -self.half_width + self.spacing * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def momentum_nodes(self) -> np.ndarray:
        """Angular wave numbers in FFT order; includes -k_Nyquist, not +k_Nyquist."""
        k = 2.0 * np.pi * sfft.fftfreq(self.n_points, d=self.spacing)
        k.flags.writeable = False
        return k

    @cached_property
    def separations(self) -> np.ndarray:
        """Minimum-image table of X_i - X_j on the periodic grid, in ``[-L, L)``.

        Shared by every translation-invariant multiplier, so entries that
        straddle the seam are treated as the near-diagonal entries they are.
        """
        x = self.positions
        L = self.half_width
        y = np.mod(x[:, None] - x[None, :] + L, 2.0 * L) - L
        y.flags.writeable = False
        return y

    @cached_property
    def wraps(self) -> np.ndarray:
        """Integer ``k`` with ``separations = X_i - X_j + 2 L k``."""
        x = self.positions
        k = np.rint((self.separations - (x[:, None] - x[None, :])) / (2.0 * self.half_width)).astype(np.int8)
        k.flags.writeable = False
        return k


@dataclass(frozen=True, eq=False)
class DensityKernel:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, copy=True)
        n = self.grid.n_points
        if v.shape != (n, n):
            raise PreconditionError(f"kernel shape {v.shape} does not match grid ({n}, {n})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def _wrap(cls, grid: GridSpec, values: np.ndarray) -> "DensityKernel":
        # internal fast path: caller hands over ownership of a fresh array
        obj = object.__new__(cls)
        values.flags.writeable = False
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", values)
        return obj

    @property
    def operator_matrix(self) -> np.ndarray:
        return self.grid.spacing * self.values

    def hermiticity_defect(self) -> float:
        v = self.values
        return float(np.max(np.abs(v - v.conj().T)))

    def _check(self, other: "DensityKernel"):
        if other.grid != self.grid:
            raise PreconditionError("kernels live on different grids")

    def __add__(self, other):
        self._check(other)
        return DensityKernel._wrap(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return DensityKernel._wrap(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return DensityKernel._wrap(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return DensityKernel._wrap(self.grid, -self.values)


@dataclass(frozen=True)
class ObservableRecord:
    time: float
    trace: float
    kinetic_energy: float
    position_moment: float
    mixed_moment: float
    purity: float
    s2_norm: float

    FIELDS = ("trace", "kinetic_energy", "position_moment", "mixed_moment", "purity", "s2_norm")


# -- construction ----------------------------------------------------------------


def pure_state(grid: GridSpec, psi: np.ndarray) -> DensityKernel:
    """Rank-one unit-trace kernel ``psi(X) conj(psi(X'))`` after normalising ``psi``."""
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.spacing)
    return DensityKernel._wrap(grid, np.outer(psi, psi.conj()))


def outer_kernel(grid: GridSpec, phi: np.ndarray, psi: np.ndarray) -> DensityKernel:
    """Kernel of ``|phi><psi|`` with no normalisation."""
    return DensityKernel._wrap(grid, np.outer(np.asarray(phi, complex), np.conj(psi)))


def gaussian_wavefunction(grid: GridSpec, center: float, momentum: float, width: float) -> np.ndarray:
    x = grid.positions
    psi = np.exp(-((x - center) ** 2) / (4.0 * width**2) + 1j * momentum * x)
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.spacing)


def make_gaussian_state(grid: GridSpec, center: float, momentum: float, width: float) -> DensityKernel:
    """Pure Gaussian wave packet with position variance ``width**2``."""
    if not width > 0:
        raise PreconditionError("width must be positive")
    if 6.0 * width >= grid.half_width or abs(center) + 6.0 * width >= grid.half_width:
        raise PreconditionError(
            f"grid half-width {grid.half_width} too small for center={center}, width={width}"
        )
    return pure_state(grid, gaussian_wavefunction(grid, center, momentum, width))


def zero_kernel(grid: GridSpec) -> DensityKernel:
    return DensityKernel._wrap(grid, np.zeros((grid.n_points, grid.n_points), complex))


# -- momentum representation ---------------------------------------------------------


def to_momentum(values: np.ndarray) -> np.ndarray:
    """``F v F^H / n`` with ``F`` the unnormalised DFT; rows/cols in FFT order."""
    return sfft.ifft(sfft.fft(values, axis=0), axis=1)


def from_momentum(values_hat: np.ndarray) -> np.ndarray:
    return sfft.fft(sfft.ifft(values_hat, axis=0), axis=1)


def _free_phase(grid: GridSpec, t: float) -> np.ndarray:
    return np.exp(-0.5j * t * grid.momentum_nodes**2)


def _free_values(grid: GridSpec, values: np.ndarray, t: float) -> np.ndarray:
    if t == 0.0:
        return values.copy()
    ph = _free_phase(grid, t)
    vh = to_momentum(values)
    vh *= ph[:, None]
    vh *= ph.conj()[None, :]
    return from_momentum(vh)


# -- scalar functionals ------------------------------------------------------------------


def trace(rho: DensityKernel, imag_tolerance: float = 1e-10) -> float:
    tr = np.sum(np.diagonal(rho.values)) * rho.grid.spacing
    if abs(tr.imag) > imag_tolerance:
        raise HermiticityError(f"trace has imaginary part {tr.imag:.3e}")
    return float(tr.real)


def _is_hermitian(values: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(1.0, float(np.max(np.abs(values))))
    return float(np.max(np.abs(values - values.conj().T))) <= tol * scale


def _hermitized(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values.conj().T)


def singular_values(rho: DensityKernel) -> np.ndarray:
    """Singular values of the operator (descending)."""
    m = rho.operator_matrix
    if _is_hermitian(m, 1e-13):
        s = np.abs(np.linalg.eigvalsh(_hermitized(m)))
        return np.sort(s)[::-1]
    return np.linalg.svd(m, compute_uv=False)


def schatten_norm(rho: DensityKernel, p: float) -> float:
    if p < 1:
        raise PreconditionError(f"Schatten index must be >= 1, got {p}")
    return schatten_from_singular_values(singular_values(rho), p)


def schatten_from_singular_values(s: np.ndarray, p: float) -> float:
    if np.isinf(p):
        return float(s.max(initial=0.0))
    if s.size == 0 or s.max() == 0.0:
        return 0.0
    smax = s.max()
    # scale out the largest value so large p does not underflow
    return float(smax * np.sum((s / smax) ** p) ** (1.0 / p))


def kinetic_energy(rho: DensityKernel) -> float:
    """``Tr(P rho P)`` evaluated on the momentum diagonal."""
    return _kinetic(rho.grid, rho.values)


def _kinetic(grid: GridSpec, values: np.ndarray) -> float:
    vh_diag = np.diagonal(to_momentum(values))
    return float(np.real(np.sum(grid.momentum_nodes**2 * vh_diag)) * grid.spacing)


def position_moment(rho: DensityKernel) -> float:
    return _position(rho.grid, rho.values)


def _position(grid: GridSpec, values: np.ndarray) -> float:
    return float(np.real(np.sum(grid.positions**2 * np.diagonal(values))) * grid.spacing)


def mixed_moment(rho: DensityKernel) -> float:
    """``Tr(P rho X + X rho P)`` with ``P = -i d/dX``.

    This is the rate of change of ``Tr(X rho X)`` under the free flow.  For a
    positive state ``rho = sum_j l_j |psi_j><psi_j|`` it equals
    ``sum_j 2 l_j Re<X psi_j | P psi_j>``; the trace form below is the same
    linear functional and needs no eigendecomposition.
    """
    return _mixed(rho.grid, rho.values)


def _mixed(grid: GridSpec, values: np.ndarray) -> float:
    k = grid.momentum_nodes
    p_rho_diag = np.diagonal(sfft.ifft(k[:, None] * sfft.fft(values, axis=0), axis=0))
    return float(2.0 * np.real(np.sum(grid.positions * p_rho_diag)) * grid.spacing)


def purity(rho: DensityKernel) -> float:
    return _purity(rho.grid, rho.values)


def _purity(grid: GridSpec, values: np.ndarray) -> float:
    # Tr(rho^2) = sum |v_ij|^2 dx^2 for Hermitian kernels
    return float(np.vdot(values, values).real) * grid.spacing**2


def positivity_floor(rho: DensityKernel) -> float:
    """Smallest eigenvalue of the Hermitized operator matrix."""
    return _floor(rho.grid, rho.values)


def _floor(grid: GridSpec, values: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_hermitized(values) * grid.spacing)[0])


def boundary_mass(rho: DensityKernel, points: int = 3) -> float:
    d = np.abs(np.diagonal(rho.values).real) * rho.grid.spacing
    return float(d[:points].sum() + d[-points:].sum())


def check_boundary(rho: DensityKernel, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    mass = boundary_mass(rho, tolerances.boundary_points)
    if mass > tolerances.boundary_mass:
        warnings.warn(
            f"state mass {mass:.2e} within {tolerances.boundary_points} grid points of the "
            "periodic boundary; enlarge half_width",
            BoundaryWarning,
            stacklevel=2,
        )
    return mass


def observe(rho: DensityKernel, time: float) -> ObservableRecord:
    return observe_values(rho.grid, rho.values, time)


def observe_values(grid: GridSpec, values: np.ndarray, time: float) -> ObservableRecord:
    tr = np.sum(np.diagonal(values)).real * grid.spacing
    pur = _purity(grid, values)
    return ObservableRecord(
        time=float(time),
        trace=float(tr),
        kinetic_energy=_kinetic(grid, values),
        position_moment=_position(grid, values),
        mixed_moment=_mixed(grid, values),
        purity=pur,
        s2_norm=float(np.sqrt(pur)),
    )


# -- propagators ------------------------------------------------------------------------


def free_evolve(rho: DensityKernel, t: float) -> DensityKernel:
    """Exact free flow on the periodic grid (diagonal in momentum)."""
    return DensityKernel._wrap(rho.grid, _free_values(rho.grid, rho.values, float(t)))


def _potential_conjugate(values: np.ndarray, phase: np.ndarray) -> np.ndarray:
    return values * phase[:, None] * phase.conj()[None, :]


def split_step_evolve(rho: DensityKernel, potential: np.ndarray, dt: float) -> DensityKernel:
    """One Strang step for ``H0 + V``: half potential, full free, half potential."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    grid = rho.grid
    half = np.exp(-0.5j * dt * np.asarray(potential, dtype=float))
    v = _potential_conjugate(rho.values, half)
    v = _free_values(grid, v, dt)
    v = _potential_conjugate(v, half)
    return DensityKernel._wrap(grid, v)


class StrangFlow:
    """Repeated Strang steps for ``H0 + V`` with a fixed maximal step.

    A segment of length ``tau`` is advanced by ``m = floor(tau / dt)`` full steps
    followed by one remainder step, so no step exceeds ``dt``.  The one-step
    propagator ``S`` and its powers are cached as dense unitaries, which makes
    a segment cost two matrix products however many steps it holds.
    """

    direct_cache = 64

    def __init__(self, grid: GridSpec, potential: np.ndarray, dt: float, kinetic: bool = True):
        if not dt > 0:
            raise PreconditionError("dt must be positive")
        self.grid = grid
        self.dt = float(dt)
        self.kinetic = kinetic
        self.potential = np.asarray(potential, dtype=float)
        n = grid.n_points
        half = np.exp(-0.5j * self.dt * self.potential)
        if kinetic:
            # circulant free propagator F^-1 diag(phase) F, first column c
            c = sfft.ifft(_free_phase(grid, self.dt))
            idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
            step = half[:, None] * c[idx] * half[None, :]
        else:
            step = np.diag(half * half)
        self._powers: dict[int, np.ndarray] = {1: step}
        self._binary: list[np.ndarray] = [step]

    def _power(self, m: int) -> np.ndarray:
        if m <= self.direct_cache:
            hi = max(self._powers)
            while hi < m:
                self._powers[hi + 1] = self._powers[hi] @ self._powers[1]
                hi += 1
            return self._powers[m]
        out = None
        bit = 0
        while m:
            while len(self._binary) <= bit:
                b = self._binary[-1]
                self._binary.append(b @ b)
            if m & 1:
                out = self._binary[bit] if out is None else self._binary[bit] @ out
            m >>= 1
            bit += 1
        return out

    def evolve(self, values: np.ndarray, tau: float) -> np.ndarray:
        """Advance a kernel array by ``tau`` (returns a new array)."""
        if tau < 0:
            raise PreconditionError("cannot evolve backwards")
        m = int(np.floor(tau / self.dt * (1.0 + 1e-12)))
        rest = tau - m * self.dt
        out = values
        if m > 0:
            u = self._power(m)
            out = u @ out @ u.conj().T
        if rest > 1e-15 * max(1.0, tau):
            half = np.exp(-0.5j * rest * self.potential)
            out = _potential_conjugate(out, half)
            if self.kinetic:
                out = _free_values(self.grid, out, rest)
            out = _potential_conjugate(out, half)
        elif out is values:
            out = values.copy()
        return out
