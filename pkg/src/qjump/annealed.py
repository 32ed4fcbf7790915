"""Mean-state master equation and its closed-form moment laws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collision import BathParams, _theta_inf_values
from .errors import PreconditionError
from .operators import (
    DensityKernel,
    GridSpec,
    ObservableRecord,
    _free_values,
    kinetic_energy,
    mixed_moment,
    observe_values,
    position_moment,
)


@dataclass
class AnnealedRun:
    params: BathParams
    dt: float
    times: np.ndarray
    states: list[DensityKernel]
    records: list[ObservableRecord]


def decoherence_exponent(grid: GridSpec, params: BathParams) -> np.ndarray:
    """Entrywise rate ``alpha^2 (1 - theta_inf(X - X'))``."""
    return params.alpha**2 * (1.0 - _theta_inf_values(grid, params.beta0))


def dissipative_step(rho: DensityKernel, params: BathParams, dt: float) -> DensityKernel:
    """Exact flow of ``alpha^2 (theta_inf[rho] - rho)`` over ``dt``."""
    damp = np.exp(-dt * decoherence_exponent(rho.grid, params))
    return DensityKernel._wrap(rho.grid, rho.values * damp)


def solve_annealed(
    rho0: DensityKernel,
    params: BathParams,
    times,
    dt: float = 1e-3,
    *,
    hamiltonian: bool = True,
) -> AnnealedRun:
    """Strang splitting: free half step, exact dissipation, free half step.

    Each interval between output times is cut into equal steps no longer than
    ``dt``.  Consecutive free half steps are merged.
    """
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size == 0 or ts[0] < 0 or np.any(np.diff(ts) <= 0):
        raise PreconditionError("times must be non-negative and strictly increasing")
    grid = rho0.grid
    rate = decoherence_exponent(grid, params)
    v = np.array(rho0.values, dtype=np.complex128)
    t = 0.0
    states, records = [], []
    for target in ts:
        tau = target - t
        if tau > 0:
            m = int(np.ceil(tau / dt - 1e-9))
            h = tau / m
            damp = np.exp(-h * rate)
            if hamiltonian:
                v = _free_values(grid, v, 0.5 * h)
            for i in range(m):
                v *= damp
                if hamiltonian:
                    v = _free_values(grid, v, h if i < m - 1 else 0.5 * h)
        t = float(target)
        states.append(DensityKernel._wrap(grid, v.copy()))
        records.append(observe_values(grid, v, t))
    return AnnealedRun(params=params, dt=float(dt), times=ts, states=states, records=records)


def predicted_moments(rho0: DensityKernel, params: BathParams, t: float) -> tuple[float, float]:
    """Mean kinetic energy and position moment at time ``t`` from the moments of ``rho0``.

    kinetic:  K0 + (4 alpha^2 / beta0) t
    position: Q0 + M0 t + K0 t^2 + (4 alpha^2 / (3 beta0)) t^3
    where M0 is the mixed moment, checked against ``|M0| <= 2 sqrt(Q0 K0)``.
    """
    k0 = kinetic_energy(rho0)
    q0 = position_moment(rho0)
    m0 = mixed_moment(rho0)
    if abs(m0) > 2.0 * np.sqrt(max(q0, 0.0) * max(k0, 0.0)) + 1e-8:
        raise PreconditionError(f"mixed moment {m0:.6g} violates the Cauchy-Schwarz bound")
    c = 4.0 * params.alpha**2 / params.beta0
    return k0 + c * t, q0 + m0 * t + k0 * t**2 + c * t**3 / 3.0
