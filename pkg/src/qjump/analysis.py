"""Ensembles, law diagnostics and decoherence-rate extraction."""

from __future__ import annotations

import hashlib
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from .collision import BathParams
from .environment import RngStream
from .errors import BoundaryWarning, EnsembleAborted, NumericalBreakdown, PreconditionError
from .jump import simulate_jump_trajectory
from .operators import (
    DensityKernel,
    GridSpec,
    ObservableRecord,
    boundary_mass,
    gaussian_wavefunction,
    make_gaussian_state,
    to_momentum,
)
from .sde import build_noise_model, simulate_sde_trajectory

KINDS = ("jump", "sde-ito", "sde-strat")
WORKERS_ENV = "QJUMP_WORKERS"


# -- observables ------------------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """Bounded linear functional ``rho -> Tr(A rho)``.

    kind ``"position"``: multiplication by ``exp(-(X-center)^2 / (2 width^2))``;
    ``"projector"``: rank-one projector onto a normalised Gaussian packet;
    ``"momentum"``: ``exp(-(P-center)^2 / (2 width^2))`` (a Fourier multiplier).
    """

    kind: str
    center: float = 0.0
    width: float = 1.0
    momentum: float = 0.0

    def __post_init__(self):
        if self.kind not in ("position", "projector", "momentum"):
            raise PreconditionError(f"unknown observable kind {self.kind!r}")
        if not self.width > 0:
            raise PreconditionError("observable width must be positive")

    @property
    def label(self) -> str:
        return f"{self.kind}(c={self.center:g},w={self.width:g})"

    def evaluate_values(self, grid: GridSpec, values: np.ndarray) -> float:
        dx = grid.spacing
        if self.kind == "position":
            b = np.exp(-0.5 * ((grid.positions - self.center) / self.width) ** 2)
            return float(np.real(np.dot(b, np.diagonal(values)))) * dx
        if self.kind == "projector":
            phi = gaussian_wavefunction(grid, self.center, self.momentum, self.width)
            return float(np.real(np.vdot(phi, values @ phi))) * dx * dx
        b = np.exp(-0.5 * ((grid.momentum_nodes - self.center) / self.width) ** 2)
        return float(np.real(np.dot(b, np.diagonal(to_momentum(values))))) * dx

    def __call__(self, rho: DensityKernel) -> float:
        return self.evaluate_values(rho.grid, rho.values)


DEFAULT_OBSERVABLES = (
    Observable("position", 0.0, 1.0),
    Observable("projector", 0.0, 0.5),
    Observable("momentum", 0.0, 1.0),
)


# -- ensembles --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    grid: GridSpec
    params: BathParams
    sample_times: tuple
    n_trajectories: int
    seed: int = 0
    initial: tuple = (0.0, 0.0, 0.5)
    dt: float = 1e-3
    dt_max: float | None = None
    n_nodes: int = 64
    hamiltonian: bool = True
    keep_kernels: bool = False
    observables: tuple = DEFAULT_OBSERVABLES
    coherence: bool = False
    s1_subset: int = 0
    failure_fraction: float = 0.01

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown ensemble kind {self.kind!r}")
        if self.n_trajectories < 1:
            raise PreconditionError("need at least one trajectory")
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        object.__setattr__(self, "observables", tuple(self.observables))

    def initial_state(self) -> DensityKernel:
        c, p, w = self.initial
        return make_gaussian_state(self.grid, c, p, w)


@dataclass
class MemberResult:
    index: int
    records: np.ndarray | None = None
    observables: np.ndarray | None = None
    kernels: np.ndarray | None = None
    coherence: np.ndarray | None = None
    jump_s2: float = 0.0
    jump_s1: float = float("nan")
    events: int = 0
    boundary: float = 0.0
    error: str | None = None


@lru_cache(maxsize=4)
def _initial(spec_initial, grid):
    c, p, w = spec_initial
    return make_gaussian_state(grid, c, p, w)


@lru_cache(maxsize=4)
def _noise(grid, params, n_nodes):
    return build_noise_model(grid, params, n_nodes)


def run_member(spec: EnsembleSpec, index: int) -> MemberResult:
    """One trajectory of the ensemble on stream ``(seed, index)``."""
    rho0 = _initial(spec.initial, spec.grid)
    rng = RngStream(spec.seed, index)
    out = MemberResult(index)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        try:
            if spec.kind == "jump":
                norm = "s1" if index < spec.s1_subset else "s2"
                res = simulate_jump_trajectory(
                    rho0,
                    spec.params,
                    spec.sample_times,
                    spec.dt_max,
                    rng,
                    keep_snapshots=True,
                    jump_norm=norm,
                    hamiltonian=spec.hamiltonian,
                )
                out.events = res.event_count
                if res.jump_norms_s2.size:
                    out.jump_s2 = float(res.jump_norms_s2.max())
                if norm == "s1":
                    out.jump_s1 = res.max_jump
            else:
                res = simulate_sde_trajectory(
                    rho0,
                    spec.params,
                    spec.sample_times,
                    spec.dt,
                    "ito" if spec.kind == "sde-ito" else "stratonovich",
                    rng,
                    noise=_noise(spec.grid, spec.params, spec.n_nodes),
                    keep_snapshots=True,
                    hamiltonian=spec.hamiltonian,
                )
        except NumericalBreakdown as exc:
            out.error = str(exc)
            return out
    snaps = res.snapshots
    out.records = np.array([[getattr(r, f) for f in ObservableRecord.FIELDS] for r in res.records])
    out.observables = np.array([[o(s) for o in spec.observables] for s in snaps]).reshape(len(snaps), -1)
    out.boundary = max(boundary_mass(s) for s in snaps)
    if spec.keep_kernels:
        out.kernels = np.stack([s.values for s in snaps])
    if spec.coherence:
        out.coherence = np.stack([_abs_profile(s.values) for s in snaps])
    return out


@dataclass
class EnsembleSummary:
    kind: str
    n_trajectories: int
    n_failed: int
    times: np.ndarray
    means: dict
    stderr: dict
    samples: np.ndarray = field(repr=False)
    observable_labels: tuple = ()
    observable_samples: np.ndarray | None = field(default=None, repr=False)
    mean_kernels: list | None = field(default=None, repr=False)
    kernel_s2_stderr: np.ndarray | None = None
    coherence_samples: np.ndarray | None = field(default=None, repr=False)
    coherence_initial: np.ndarray | None = field(default=None, repr=False)
    max_jump_s2: float = 0.0
    max_jump_s1: float = float("nan")
    n_s1_checked: int = 0
    total_events: int = 0
    max_boundary_mass: float = 0.0

    def digest(self) -> str:
        """SHA-256 over every reported statistic; equal digests mean bit-identical results."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.samples).tobytes())
        for arr in (self.observable_samples, self.kernel_s2_stderr, self.coherence_samples):
            if arr is not None:
                h.update(np.ascontiguousarray(arr).tobytes())
        if self.mean_kernels is not None:
            for k in self.mean_kernels:
                h.update(np.ascontiguousarray(k.values).tobytes())
        h.update(repr((self.n_failed, self.max_jump_s2, self.max_jump_s1, self.total_events)).encode())
        return h.hexdigest()


class _Neumaier:
    """Entrywise compensated running sum."""

    def __init__(self, shape, dtype):
        self.s = np.zeros(shape, dtype)
        self.c = np.zeros(shape, dtype)

    def add(self, x):
        t = self.s + x
        big = np.abs(self.s) >= np.abs(x)
        self.c += np.where(big, (self.s - t) + x, (x - t) + self.s)
        self.s = t

    @property
    def total(self):
        return self.s + self.c


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def _member_iter(spec, workers):
    idx = range(spec.n_trajectories)
    if workers == 1:
        for i in idx:
            yield run_member(spec, i)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # ordered map: the reduction sees members in index order regardless of scheduling
        yield from pool.map(run_member, [spec] * spec.n_trajectories, idx, chunksize=8)


def fsum_mean(x: np.ndarray, axis: int = 0) -> np.ndarray:
    x = np.moveaxis(np.asarray(x, float), axis, 0)
    flat = x.reshape(x.shape[0], -1)
    m = np.array([math.fsum(col) for col in flat.T]) / x.shape[0]
    return m.reshape(x.shape[1:])


def run_ensemble(spec: EnsembleSpec, workers: int | None = None) -> EnsembleSummary:
    """Run all trajectories and reduce them deterministically.

    Parallelism follows ``workers`` or the ``QJUMP_WORKERS`` environment
    variable.  Trajectories that break down are counted; more than
    ``failure_fraction`` of them aborts the ensemble.
    """
    workers = _worker_count(workers)
    grid = spec.grid
    T = len(spec.sample_times)
    recs, obs, coh = [], [], []
    ksum = ksq = None
    failed = 0
    max_s2, max_s1, n_s1, events, bmax = 0.0, float("nan"), 0, 0, 0.0
    limit = spec.failure_fraction * spec.n_trajectories
    for m in _member_iter(spec, workers):
        if m.error is not None:
            failed += 1
            if failed > limit:
                raise EnsembleAborted(f"{failed} of {spec.n_trajectories} trajectories broke down; last: {m.error}")
            continue
        recs.append(m.records)
        obs.append(m.observables)
        if m.coherence is not None:
            coh.append(m.coherence)
        if m.kernels is not None:
            if ksum is None:
                ksum = _Neumaier(m.kernels.shape, np.complex128)
                ksq = _Neumaier(m.kernels.shape, np.float64)
            ksum.add(m.kernels)
            ksq.add(np.abs(m.kernels) ** 2)
        max_s2 = max(max_s2, m.jump_s2)
        if not math.isnan(m.jump_s1):
            max_s1 = m.jump_s1 if math.isnan(max_s1) else max(max_s1, m.jump_s1)
            n_s1 += 1
        events += m.events
        bmax = max(bmax, m.boundary)
    if not recs:
        raise EnsembleAborted("every trajectory broke down")
    samples = np.stack(recs)
    M = samples.shape[0]
    means, errs = {}, {}
    for j, name in enumerate(ObservableRecord.FIELDS):
        col = samples[:, :, j]
        mu = fsum_mean(col)
        means[name] = mu
        if M > 1:
            var = fsum_mean((col - mu) ** 2) * M / (M - 1)
            errs[name] = np.sqrt(var / M)
        else:
            errs[name] = np.zeros(T)
    mean_kernels = kse = None
    if ksum is not None:
        mk = ksum.total / M
        mean_kernels = [DensityKernel._wrap(grid, mk[t]) for t in range(T)]
        if M > 1:
            var = np.maximum(ksq.total / M - np.abs(mk) ** 2, 0.0) * M / (M - 1)
            kse = np.sqrt(var.sum(axis=(1, 2)) / M) * grid.spacing
        else:
            kse = np.zeros(T)
    coh_init = _abs_profile(spec.initial_state().values) if coh else None
    return EnsembleSummary(
        kind=spec.kind,
        n_trajectories=M,
        n_failed=failed,
        times=np.asarray(spec.sample_times),
        means=means,
        stderr=errs,
        samples=samples,
        observable_labels=tuple(o.label for o in spec.observables),
        observable_samples=np.stack(obs),
        mean_kernels=mean_kernels,
        kernel_s2_stderr=kse,
        coherence_samples=np.stack(coh) if coh else None,
        coherence_initial=coh_init,
        max_jump_s2=max_s2,
        max_jump_s1=max_s1,
        n_s1_checked=n_s1,
        total_events=events,
        max_boundary_mass=bmax,
    )


def kernel_s2_distance(a: DensityKernel, b: DensityKernel) -> float:
    d = a.values - b.values
    return float(np.sqrt(np.vdot(d, d).real)) * a.grid.spacing


# -- law comparison ---------------------------------------------------------------------


@dataclass
class LawDistance:
    observable: str
    time: float
    samples_a: np.ndarray = field(repr=False)
    samples_b: np.ndarray = field(repr=False)
    ks_statistic: float
    p_value: float
    mean_gap: float
    ci_low: float = float("nan")
    ci_high: float = float("nan")


def bootstrap_ks(a, b, n_boot: int, rng: np.random.Generator, level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap band of the two-sample KS statistic."""
    a, b = np.asarray(a), np.asarray(b)
    ks = np.empty(n_boot)
    for k in range(n_boot):
        ra = a[rng.integers(0, a.size, a.size)]
        rb = b[rng.integers(0, b.size, b.size)]
        ks[k] = stats.ks_2samp(ra, rb).statistic
    q = 0.5 * (1.0 - level)
    return float(np.quantile(ks, q)), float(np.quantile(ks, 1.0 - q))


def law_distance(
    ens_a: EnsembleSummary,
    ens_b: EnsembleSummary,
    observable: int,
    t: float,
    *,
    n_boot: int = 0,
    rng: RngStream | None = None,
) -> LawDistance:
    """Two-sample KS comparison of ``Tr(A rho_t)`` across two ensembles."""
    ia = np.flatnonzero(np.isclose(ens_a.times, t))
    ib = np.flatnonzero(np.isclose(ens_b.times, t))
    if ia.size == 0 or ib.size == 0:
        raise PreconditionError(f"time {t} is not sampled by both ensembles")
    xa = ens_a.observable_samples[:, ia[0], observable]
    xb = ens_b.observable_samples[:, ib[0], observable]
    res = stats.ks_2samp(xa, xb)
    out = LawDistance(
        observable=ens_a.observable_labels[observable],
        time=float(t),
        samples_a=xa,
        samples_b=xb,
        ks_statistic=float(res.statistic),
        p_value=float(res.pvalue),
        mean_gap=float(np.mean(xa) - np.mean(xb)),
    )
    if n_boot:
        gen = (rng or RngStream(0, 0)).generator()
        out.ci_low, out.ci_high = bootstrap_ks(xa, xb, n_boot, gen)
    return out


def non_increasing_within_bands(distances: list[LawDistance]) -> bool:
    """Each KS value stays below the upper band of its predecessor."""
    return all(b.ks_statistic <= a.ci_high for a, b in zip(distances, distances[1:]))


# -- decoherence ------------------------------------------------------------------------


def _abs_profile(values: np.ndarray) -> np.ndarray:
    """Mean over X of ``|rho(X + Y/2, X - Y/2)|`` for ``Y = 2 j dx``, j = 0 .. n/4."""
    n = values.shape[0]
    a = np.abs(values)
    i = np.arange(n)
    return np.array([a[(i + j) % n, (i - j) % n].mean() for j in range(n // 4 + 1)])


def coherence_separations(grid: GridSpec) -> np.ndarray:
    return 2.0 * grid.spacing * np.arange(grid.n_points // 4 + 1)


def coherence_profile(rho: DensityKernel, rho0: DensityKernel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Separations ``Y`` and the off-diagonal magnitude profile, relative to ``rho0`` when given."""
    prof = _abs_profile(rho.values)
    if rho0 is not None:
        prof = prof / _abs_profile(rho0.values)
    return coherence_separations(rho.grid), prof


def fit_decay_rate(times, ratios) -> float:
    """Least-squares ``r`` in ``ratio = exp(-r t)`` (line through the origin in log scale)."""
    t = np.asarray(times, float)
    y = -np.log(np.asarray(ratios, float))
    return float(np.dot(t, y) / np.dot(t, t))


def ensemble_decay_rates(summary: EnsembleSummary, j: int) -> np.ndarray:
    """Per-trajectory fitted decay rate of the profile at separation index ``j``."""
    if summary.coherence_samples is None:
        raise PreconditionError("ensemble was run without coherence profiles")
    ratios = summary.coherence_samples[:, :, j] / summary.coherence_initial[j]
    t = summary.times
    y = -np.log(ratios)
    return (y @ t) / np.dot(t, t)
