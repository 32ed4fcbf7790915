"""Von Neumann evolution with Poisson collisions.

Between collision times the kernel follows ``H0 + V`` with the compensating
potential ``V = +-alpha sqrt(N - alpha^2) gamma_inf``; at each collision time
the collision multiplier is applied to the left limit of the state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .collision import BathParams, collision_multiplier, compensating_potential
from .environment import RngStream, sample_ppp
from .errors import NumericalBreakdown, PreconditionError
from .operators import (
    DEFAULT_TOLERANCES,
    DensityKernel,
    GridSpec,
    ObservableRecord,
    StrangFlow,
    Tolerances,
    _floor,
    check_boundary,
    free_evolve,
    observe_values,
)


@dataclass
class TrajectoryResult:
    params: BathParams
    sample_times: np.ndarray
    records: list[ObservableRecord]
    snapshots: list[DensityKernel] | None = None
    event_count: int = 0
    rng: RngStream | None = None
    scheme: str = "jump"
    jump_norms: np.ndarray | None = field(default=None, repr=False)
    jump_norms_s2: np.ndarray | None = field(default=None, repr=False)

    @property
    def max_jump(self) -> float:
        if self.jump_norms is None or self.jump_norms.size == 0:
            return 0.0
        return float(self.jump_norms.max())


def default_dt_max(params: BathParams) -> float:
    return 0.01 / np.sqrt(params.rate)


def jump_bound(params: BathParams) -> float:
    """Worst-case single-collision size in any Schatten norm for a unit-norm state."""
    return 2.0 * (params.alpha**2 / params.rate + params.alpha / np.sqrt(params.rate))


@lru_cache(maxsize=8)
def _flow(grid: GridSpec, params: BathParams, dt: float, hamiltonian: bool) -> StrangFlow:
    return StrangFlow(grid, compensating_potential(grid, params), dt, kinetic=hamiltonian)


def _validated_times(sample_times) -> np.ndarray:
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise PreconditionError("sample_times must be a non-empty vector")
    if ts[0] < 0 or np.any(np.diff(ts) <= 0):
        raise PreconditionError("sample_times must be non-negative and strictly increasing")
    return ts


def record_checked(
    grid: GridSpec,
    values: np.ndarray,
    t: float,
    tolerances: Tolerances,
    diagnostics: dict,
) -> ObservableRecord:
    rec = observe_values(grid, values, t)
    floor = _floor(grid, values)
    if floor < -tolerances.breakdown or abs(rec.trace - 1.0) > 1e-8 or not np.isfinite(rec.kinetic_energy):
        raise NumericalBreakdown(
            f"state left the physical set at t={t:.6g} (floor={floor:.3e}, trace={rec.trace:.12f})",
            {**diagnostics, "time": t, "positivity_floor": floor, "trace": rec.trace},
        )
    return rec


def simulate_jump_trajectory(
    rho0: DensityKernel,
    params: BathParams,
    sample_times,
    dt_max: float | None = None,
    rng: RngStream | None = None,
    *,
    keep_snapshots: bool = False,
    jump_norm: str | None = None,
    hamiltonian: bool = True,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> TrajectoryResult:
    """Integrate one realisation of the collision process.

    ``jump_norm`` may be ``"s1"`` or ``"s2"`` to record the Schatten norm of
    every jump ``rho_T - rho_T-``; S1 needs an eigendecomposition per event.
    The S2 norms are recorded whenever any norm is requested.
    With ``hamiltonian=False`` the kinetic term is dropped and only the
    compensating potential acts between collisions.
    """
    if jump_norm not in (None, "s1", "s2"):
        raise PreconditionError(f"unknown jump norm {jump_norm!r}")
    ts = _validated_times(sample_times)
    rng = rng if rng is not None else RngStream(0, 0)
    grid = rho0.grid
    dt = float(dt_max) if dt_max is not None else default_dt_max(params)
    flow = _flow(grid, params, dt, bool(hamiltonian))
    events = sample_ppp(params, float(ts[-1]), rng) if ts[-1] > 0 else []

    dx = grid.spacing
    values = np.array(rho0.values, dtype=np.complex128)
    t = 0.0
    records, snaps, norms, norms2 = [], [], [], []
    diag = {"event_count": 0, "seed": rng.seed, "stream_id": rng.stream_id}
    ev_iter = iter(events)
    nxt = next(ev_iter, None)
    for s in ts:
        while nxt is not None and nxt.time <= s:
            values = flow.evolve(values, nxt.time - t)
            t = nxt.time
            m = collision_multiplier(grid, nxt.momentum, nxt.position, params)
            if jump_norm is None:
                values = values * m
            else:
                jump = values * (m - 1.0)
                values = values + jump
                norms2.append(float(np.sqrt(np.vdot(jump, jump).real)) * dx)
                if jump_norm == "s1":
                    ev = np.linalg.eigvalsh(0.5 * (jump + jump.conj().T))
                    norms.append(float(np.abs(ev).sum()) * dx)
            diag["event_count"] += 1
            nxt = next(ev_iter, None)
        values = flow.evolve(values, s - t)
        t = float(s)
        records.append(record_checked(grid, values, t, tolerances, diag))
        snap = DensityKernel._wrap(grid, values.copy())
        check_boundary(snap, tolerances)
        if keep_snapshots:
            snaps.append(snap)

    return TrajectoryResult(
        params=params,
        sample_times=ts,
        records=records,
        snapshots=snaps if keep_snapshots else None,
        event_count=diag["event_count"],
        rng=rng,
        scheme="jump",
        jump_norms=np.asarray(norms if jump_norm == "s1" else norms2) if jump_norm else None,
        jump_norms_s2=np.asarray(norms2) if jump_norm else None,
    )


def filtered_state(rho_t: DensityKernel, t: float) -> DensityKernel:
    """Undo the free flow: ``exp(itH0) rho_t exp(-itH0)``."""
    return free_evolve(rho_t, -float(t))
