"""Command-line entry point: ``qjump <mode> --config FILE [--seed N] [--out PATH]``."""

from __future__ import annotations

import argparse
import sys
import time
import warnings

import numpy as np

from .analysis import (
    DEFAULT_OBSERVABLES,
    EnsembleSpec,
    law_distance,
    non_increasing_within_bands,
    run_ensemble,
)
from .annealed import solve_annealed
from .config import (
    MODES,
    ResultFile,
    RunConfig,
    atomic_write,
    parse_config,
    snapshots_to_bytes,
    write_result,
)
from .environment import RngStream
from .errors import BoundaryWarning, ConfigError, EnsembleAborted, NumericalBreakdown, QJumpError
from .operators import ObservableRecord, make_gaussian_state
from .properties import appendix_property_suite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
RECORD_COLUMNS = ("trajectory", "time") + ObservableRecord.FIELDS


def _ensemble_spec(cfg: RunConfig, kind: str, params=None, keep_kernels=False) -> EnsembleSpec:
    return EnsembleSpec(
        kind=kind,
        grid=cfg.grid,
        params=params or cfg.bath,
        sample_times=cfg.sample_times,
        n_trajectories=cfg.trajectories,
        seed=cfg.seed,
        initial=(cfg.center, cfg.momentum, cfg.width),
        dt=cfg.dt,
        dt_max=cfg.dt_max,
        n_nodes=cfg.n_nodes,
        hamiltonian=cfg.hamiltonian,
        keep_kernels=keep_kernels,
    )


def _record_rows(samples: np.ndarray, times) -> list:
    rows = []
    for m, traj in enumerate(samples):
        for t, rec in zip(times, traj):
            rows.append((m, float(t)) + tuple(float(v) for v in rec))
    return rows


def run(cfg: RunConfig) -> tuple[ResultFile, list | None]:
    """Execute one configuration; returns the result and optional ``(times, kernels)`` snapshots."""
    meta = {"seed": cfg.seed, "grid": f"{cfg.n_points}x[-{cfg.half_width!r},{cfg.half_width!r})"}
    if cfg.mode == "annealed":
        rho0 = make_gaussian_state(cfg.grid, cfg.center, cfg.momentum, cfg.width)
        out = solve_annealed(rho0, cfg.bath, cfg.sample_times, cfg.dt, hamiltonian=cfg.hamiltonian)
        rows = [(0, r.time) + tuple(getattr(r, f) for f in ObservableRecord.FIELDS) for r in out.records]
        snaps = (list(out.times), [s.values for s in out.states])
        return ResultFile(cfg, RECORD_COLUMNS, rows, meta), snaps
    if cfg.mode in ("jump", "sde"):
        kind = "jump" if cfg.mode == "jump" else ("sde-ito" if cfg.scheme == "ito" else "sde-strat")
        summ = run_ensemble(_ensemble_spec(cfg, kind, keep_kernels=True))
        meta.update(
            scheme=kind,
            trajectories=summ.n_trajectories,
            failed=summ.n_failed,
            max_boundary_mass=f"{summ.max_boundary_mass:.3e}",
        )
        snaps = (list(summ.times), [k.values for k in summ.mean_kernels])
        return ResultFile(cfg, RECORD_COLUMNS, _record_rows(summ.samples, summ.times), meta), snaps
    if cfg.mode == "compare":
        sde = run_ensemble(_ensemble_spec(cfg, "sde-ito"))
        rows = []
        dists = {}
        boot = RngStream(cfg.seed, 2**32)
        for N in cfg.n_list:
            params = cfg.bath.__class__(cfg.alpha, cfg.cutoff, cfg.beta0, float(N), cfg.sign)
            jmp = run_ensemble(_ensemble_spec(cfg, "jump", params=params))
            for j in range(len(DEFAULT_OBSERVABLES)):
                for t in cfg.sample_times:
                    d = law_distance(jmp, sde, j, t, n_boot=cfg.n_boot, rng=boot.substream(N * 1000 + j))
                    dists.setdefault((j, t), []).append(d)
                    rows.append((N, d.observable, t, d.ks_statistic, d.ci_low, d.ci_high, d.p_value, d.mean_gap))
        for (j, t), ds in dists.items():
            meta[f"non_increasing.{ds[0].observable}.t={t!r}"] = str(non_increasing_within_bands(ds)).lower()
        cols = ("N", "observable", "time", "ks", "ci_low", "ci_high", "p_value", "mean_gap")
        return ResultFile(cfg, cols, rows, meta), None
    rep = appendix_property_suite(cfg.trials, RngStream(cfg.seed, 0), cfg.grid)
    rows = [
        (name, rep.counts[name], sum(v.check == name for v in rep.violations), rep.worst_margin[name])
        for name in rep.counts
    ]
    meta["violations"] = len(rep.violations)
    return ResultFile(cfg, ("check", "evaluated", "violations", "worst_margin"), rows, meta), None


def _mentions_mode(text: str) -> bool:
    return any(line.split("#", 1)[0].split("=", 1)[0].strip() == "mode" for line in text.splitlines())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qjump", description=__doc__)
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", help="result file path (default: config 'output' or stdout)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config entry")
    p.add_argument("--snapshots", action="store_true", help="also write kernel snapshots to OUT.kernels.bin")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out:
            overrides["output"] = args.out
        if not _mentions_mode(text):
            overrides.setdefault("mode", args.mode)
        cfg = parse_config(text, overrides)
        if cfg.mode != args.mode:
            raise ConfigError(f"config mode {cfg.mode!r} does not match subcommand {args.mode!r}", key="mode")
    except (ConfigError, OSError) as exc:
        print(f"qjump: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("once", BoundaryWarning)
            result, snaps = run(cfg)
        elapsed = time.perf_counter() - t0
    except (NumericalBreakdown, EnsembleAborted) as exc:
        print(f"qjump: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except QJumpError as exc:
        print(f"qjump: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.output:
        write_result(result, cfg.output, wall_clock=elapsed)
        if args.snapshots and snaps is not None:
            atomic_write(cfg.output + ".kernels.bin", snapshots_to_bytes(*snaps))
    else:
        sys.stdout.write(result.to_text())
    if cfg.mode == "propcheck" and int(result.meta["violations"]):
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
