"""Reference experiments with fixed seeds, shared by the scripts and the acceptance tests.

Every function returns a :class:`CriterionResult` whose ``statistic`` tuple
holds the numbers the verdict is based on; :meth:`CriterionResult.fingerprint`
hashes their exact binary values so reruns can be compared bit for bit.
"""

from __future__ import annotations

import hashlib
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    DEFAULT_OBSERVABLES,
    EnsembleSpec,
    coherence_profile,
    ensemble_decay_rates,
    fit_decay_rate,
    kernel_s2_distance,
    law_distance,
    non_increasing_within_bands,
    run_ensemble,
)
from .annealed import predicted_moments, solve_annealed
from .collision import BathParams, collision_apply, theta_inf
from .environment import RngStream
from .errors import BoundaryWarning
from .jump import jump_bound
from .operators import GridSpec, make_gaussian_state, positivity_floor, schatten_norm, trace
from .properties import appendix_property_suite, random_state
from .sde import (
    build_noise_model,
    coarsen_normals,
    exponent_denominator,
    factorized_covariance,
    integrate_normals,
    printed_covariance,
)

# published seeds, one per statistical experiment
SEEDS = {3: 3003, 4: 4004, 5: 5005, 6: 6006, 7: 7007, 8: 8008, 9: 9009}
ENSEMBLE_GRID = GridSpec(16.0, 128)
REFERENCE_GRID = GridSpec(10.0, 256)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    statistic: tuple
    seed: int | None = None
    elapsed: float = 0.0
    extra: dict = field(default_factory=dict, repr=False)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for v in self.statistic:
            h.update(float(v).hex().encode() + b";")
        return h.hexdigest()

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        seed = f" seed={self.seed}" if self.seed is not None else ""
        return f"criterion {self.number:2d} [{verdict}] {self.title}{seed} ({self.elapsed:.1f}s): {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        return res

    wrapper.__name__, wrapper.__doc__ = fn.__name__, fn.__doc__
    return wrapper


@_timed
def annealed_kinetic_law(grid: GridSpec = REFERENCE_GRID, dt: float = 1e-3) -> CriterionResult:
    """Kinetic energy of the mean equation against ``E0 + 4 alpha^2 t / beta0``."""
    p = BathParams()
    rho0 = make_gaussian_state(grid, 0.0, 0.0, 0.5)
    ts = (0.5, 1.0, 2.0)
    out = solve_annealed(rho0, p, ts, dt)
    errs = [abs(r.kinetic_energy / predicted_moments(rho0, p, t)[0] - 1) for t, r in zip(ts, out.records)]
    return CriterionResult(
        1,
        "annealed kinetic law",
        max(errs) <= 1e-4,
        "max rel err " + f"{max(errs):.2e} (tol 1e-4)",
        tuple(errs),
    )


@_timed
def annealed_position_law(grid: GridSpec = REFERENCE_GRID, dt: float = 1e-3) -> CriterionResult:
    """Position moment at ``t = 2`` against the cubic law."""
    p = BathParams()
    rho0 = make_gaussian_state(grid, 0.0, 0.0, 0.5)
    rec = solve_annealed(rho0, p, (2.0,), dt).records[-1]
    q_pred = predicted_moments(rho0, p, 2.0)[1]
    err = abs(rec.position_moment / q_pred - 1)
    return CriterionResult(
        2,
        "annealed position law",
        err <= 1e-3,
        f"rel err {err:.2e} at t=2 on L={grid.half_width:g}, n={grid.n_points} (tol 1e-3)",
        (err,),
    )


@_timed
def collision_structure(seed: int = SEEDS[3], draws: int = 1000, grid: GridSpec = REFERENCE_GRID) -> CriterionResult:
    """Trace, Hermiticity, positivity and the S1/S2 size bound over random collisions."""
    gen = RngStream(seed, 0).generator()
    worst = {"trace": 0.0, "herm": 0.0, "floor": 0.0, "margin": -np.inf}
    violations = 0
    for _ in range(draws):
        rho, _ = random_state(grid, gen)
        params = BathParams(
            alpha=float(gen.uniform(0.2, 2.0)),
            rate=float(np.exp(gen.uniform(np.log(5.0), np.log(2000.0)))),
            sign=int(gen.choice([-1, 1])),
        )
        p = float(gen.normal(0.0, np.sqrt(1.0 / params.beta)))
        x = float(gen.uniform(-params.cutoff, params.cutoff))
        out = collision_apply(rho, p, x, params)
        worst["trace"] = max(worst["trace"], abs(trace(out) - 1.0))
        worst["herm"] = max(worst["herm"], out.hermiticity_defect())
        worst["floor"] = min(worst["floor"], positivity_floor(out))
        a = params.alpha**2 / params.rate
        c = 2.0 * (a + np.sqrt(a) * np.exp(-2.0 * p * p))
        diff = out - rho
        for q in (1, 2):
            m = schatten_norm(diff, q) - c * schatten_norm(rho, q)
            worst["margin"] = max(worst["margin"], m)
            violations += m > 1e-12
    ok = worst["trace"] <= 1e-13 and worst["herm"] <= 1e-12 and worst["floor"] >= -1e-9 and violations == 0
    detail = (
        f"{draws} draws: trace err {worst['trace']:.1e}, herm {worst['herm']:.1e}, "
        f"floor {worst['floor']:.1e}, bound violations {violations} (worst margin {worst['margin']:.2e})"
    )
    stat = (worst["trace"], worst["herm"], worst["floor"], worst["margin"], float(violations))
    return CriterionResult(3, "collision structure", ok, detail, stat, seed)


@_timed
def jump_mean_laws(seed: int = SEEDS[4], trajectories: int = 2000, rate: float = 200.0, workers=None) -> CriterionResult:
    """Ensemble means of the jump process against the closed-form moment laws and the mean equation."""
    grid = ENSEMBLE_GRID
    params = BathParams(rate=rate)
    ts = (0.5, 1.0, 2.0)
    spec = EnsembleSpec("jump", grid, params, ts, trajectories, seed=seed, keep_kernels=True)
    summ = run_ensemble(spec, workers)
    rho0 = spec.initial_state()
    zs = []
    for k, t in enumerate(ts):
        kp, qp = predicted_moments(rho0, params, t)
        zs.append((summ.means["kinetic_energy"][k] - kp) / summ.stderr["kinetic_energy"][k])
        zs.append((summ.means["position_moment"][k] - qp) / summ.stderr["position_moment"][k])
    ann = solve_annealed(rho0, params, (1.0,), 1e-3).states[-1]
    i1 = ts.index(1.0)
    d = kernel_s2_distance(summ.mean_kernels[i1], ann)
    d1 = schatten_norm(summ.mean_kernels[i1] - ann, 1)  # reported only
    z_kernel = d / summ.kernel_s2_stderr[i1]
    ok = max(abs(z) for z in zs) <= 3.0 and z_kernel <= 3.0 and summ.n_failed == 0
    detail = (
        f"M={summ.n_trajectories}, N={rate:g}: max |z| of K,Q means {max(abs(z) for z in zs):.2f}; "
        f"mean kernel S2 gap {d:.3e} = {z_kernel:.2f} SE at t=1 (S1 gap {d1:.3e}); failures {summ.n_failed}; "
        f"max boundary mass {summ.max_boundary_mass:.1e}"
    )
    stat = tuple(zs) + (d, z_kernel, d1, float(summ.n_failed))
    return CriterionResult(4, "jump-process mean laws", ok, detail, stat, seed, extra={"digest": summ.digest()})


@_timed
def convergence_in_law(
    seed: int = SEEDS[5],
    trajectories: int = 1000,
    rates=(25.0, 100.0, 400.0),
    n_boot: int = 200,
    s1_subset: int = 50,
    workers=None,
) -> CriterionResult:
    """KS distance between jump and limit ensembles shrinking with the collision rate.

    The jump ensembles use ``sign=-1`` and the limit ensemble ``sign=+1``; the
    limit law does not depend on the sign.
    """
    grid = ENSEMBLE_GRID
    ts = (1.0,)
    sde = run_ensemble(EnsembleSpec("sde-ito", grid, BathParams(sign=1), ts, trajectories, seed=seed), workers)
    boot = RngStream(seed, 2**40)
    per_obs = {j: [] for j in range(len(DEFAULT_OBSERVABLES))}
    bound_ok, jump_lines, stat = True, [], []
    for N in rates:
        params = BathParams(rate=N, sign=-1)
        jspec = EnsembleSpec("jump", grid, params, ts, trajectories, seed=seed + int(N), s1_subset=s1_subset)
        jmp = run_ensemble(jspec, workers)
        bnd = jump_bound(params)
        ok_n = jmp.max_jump_s2 <= bnd and jmp.max_jump_s1 <= bnd
        bound_ok &= ok_n
        jump_lines.append(f"N={N:g} max jump S2 {jmp.max_jump_s2:.3f} S1 {jmp.max_jump_s1:.3f} <= {bnd:.3f}")
        stat += [jmp.max_jump_s2, jmp.max_jump_s1]
        for j in per_obs:
            d = law_distance(jmp, sde, j, 1.0, n_boot=n_boot, rng=boot.substream(int(N) * 16 + j))
            per_obs[j].append(d)
            stat += [d.ks_statistic, d.ci_low, d.ci_high]
    mono = {j: non_increasing_within_bands(ds) for j, ds in per_obs.items()}
    ks_txt = "; ".join(
        f"{ds[0].observable}: " + " -> ".join(f"{d.ks_statistic:.3f}" for d in ds) for ds in per_obs.values()
    )
    ok = all(mono.values()) and bound_ok
    detail = f"KS at t=1 for N={'/'.join(f'{n:g}' for n in rates)}: {ks_txt}; " + "; ".join(jump_lines)
    return CriterionResult(5, "convergence in law", ok, detail, tuple(stat), seed, extra={"distances": per_obs})


@_timed
def ito_strat_consistency(seed: int = SEEDS[6], paths: int = 4, horizon: float = 1.0) -> CriterionResult:
    """Terminal S2 gap between the two schemes driven by the same normals, at two step sizes."""
    grid = ENSEMBLE_GRID
    params = BathParams()
    noise = build_noise_model(grid, params)
    rho0 = make_gaussian_state(grid, 0.0, 0.0, 0.5)
    fine_dt = 1e-3
    steps = int(round(horizon / fine_dt))
    gaps = np.zeros((paths, 2))
    for k in range(paths):
        xi = RngStream(seed, k).generator().standard_normal((steps, noise.n_nodes))
        for col, (dt, z) in enumerate(((2 * fine_dt, coarsen_normals(xi)), (fine_dt, xi))):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", BoundaryWarning)
                a = integrate_normals(rho0, params, noise, z, dt, "ito")
                b = integrate_normals(rho0, params, noise, z, dt, "stratonovich")
            gaps[k, col] = schatten_norm(a - b, 2)
    rms = np.sqrt(np.mean(gaps**2, axis=0))
    ratio = rms[0] / rms[1]
    per_path = gaps[:, 0] / gaps[:, 1]
    detail = (
        f"RMS gap {rms[0]:.3e} (dt=2e-3) -> {rms[1]:.3e} (dt=1e-3), ratio {ratio:.2f} (need >= 1.5); "
        f"per path {', '.join(f'{r:.2f}' for r in per_path)}"
    )
    stat = tuple(gaps.ravel()) + (ratio,)
    return CriterionResult(6, "Ito/Stratonovich consistency", ratio >= 1.5, detail, stat, seed)


PROBE_PAIRS = ((0.0, 0.0), (0.0, 1.0), (2.0, -1.0), (3.5, 3.0), (-1.0, -2.5))


@_timed
def noise_covariance(seed: int = SEEDS[7], increments: int = 10_000) -> CriterionResult:
    """Empirical covariance of unit-time field increments at probe pairs."""
    grid = ENSEMBLE_GRID
    params = BathParams()
    noise = build_noise_model(grid, params)
    gen = RngStream(seed, 0).generator()
    xi = gen.standard_normal((increments, noise.n_nodes))
    fields = xi @ noise.basis.T
    x = grid.positions
    rows, zs, stat = [], [], []
    for X, Xp in PROBE_PAIRS:
        i, j = int(np.argmin(abs(x - X))), int(np.argmin(abs(x - Xp)))
        prod = fields[:, i] * fields[:, j]
        emp = float(prod.mean())
        se = float(prod.std(ddof=1) / np.sqrt(increments))
        ref = float(factorized_covariance(X, Xp, params))
        printed = float(printed_covariance(X, Xp, params))
        z = (emp - ref) / se
        zs.append(z)
        c = exponent_denominator(emp, X, Xp, params) if X != Xp else float("nan")
        rows.append(f"({X:g},{Xp:g}) emp {emp:.5f}±{se:.5f} fact {ref:.5f} printed {printed:.5f} z {z:+.2f} c {c:.2f}")
        stat += [emp, se, z]
    ok = max(abs(z) for z in zs) <= 3.0
    return CriterionResult(7, "noise covariance", ok, " | ".join(rows), tuple(stat), seed)


@_timed
def decoherence_ordering(seed: int = SEEDS[8], trajectories: int = 1000, workers=None) -> CriterionResult:
    """Fitted off-diagonal decay at ``Y = 1`` of the Stratonovich ensemble against the annealed rate.

    The kinetic term is switched off so the profile at fixed ``Y`` isolates the
    environment; with it on, spreading of the packet masks the decay.
    """
    grid = ENSEMBLE_GRID
    params = BathParams(beta0=2.0)
    ts = (0.25, 0.5, 0.75, 1.0)
    spec = EnsembleSpec(
        "sde-strat", grid, params, ts, trajectories, seed=seed, initial=(0.0, 0.0, 1.0), hamiltonian=False, coherence=True
    )
    summ = run_ensemble(spec, workers)
    j = int(round(1.0 / (2 * grid.spacing)))
    rates = ensemble_decay_rates(summ, j)
    q = float(np.mean(rates))
    se = float(np.std(rates, ddof=1) / np.sqrt(rates.size))
    ann = float(params.alpha**2 * (1.0 - theta_inf(1.0, params.beta0)))
    # the annealed rate from the same fitting procedure applied to the mean equation
    states = solve_annealed(spec.initial_state(), params, ts, hamiltonian=False).states
    fitted_ann = fit_decay_rate(ts, [coherence_profile(s, spec.initial_state())[1][j] for s in states])
    z = (ann - q) / max(se, np.finfo(float).tiny)
    ok = q < ann and z >= 3.0
    detail = (
        f"quenched {q:.5f}±{se:.1e} vs annealed {ann:.5f} (fit of mean equation {fitted_ann:.5f}); "
        f"gap {ann - q:.5f} = {min(z, 1e6):.3g} sigma"
    )
    return CriterionResult(8, "quenched vs annealed decoherence", ok, detail, (q, se, ann, fitted_ann), seed)


@_timed
def property_suite(seed: int = SEEDS[9], trials: int = 1000) -> CriterionResult:
    rep = appendix_property_suite(trials, RngStream(seed, 0), REFERENCE_GRID)
    n_checks = sum(rep.counts.values())
    detail = f"{trials} trials, {n_checks} checks, {len(rep.violations)} violations"
    stat = tuple(float(rep.worst_margin[k]) for k in sorted(rep.worst_margin)) + (float(len(rep.violations)),)
    return CriterionResult(9, "property suite", rep.ok, detail, stat, seed, extra={"report": rep})


STATISTICAL = {
    3: collision_structure,
    4: jump_mean_laws,
    5: convergence_in_law,
    6: ito_strat_consistency,
    7: noise_covariance,
    8: decoherence_ordering,
    9: property_suite,
}
ALL = {1: annealed_kinetic_law, 2: annealed_position_law, **STATISTICAL}
