"""Off-diagonal decay rate against separation: quenched (Stratonovich ensemble) and annealed.

    python3 scripts/decoherence_profile.py --trajectories 200
"""

import argparse

import numpy as np

from qjump.analysis import EnsembleSpec, coherence_separations, ensemble_decay_rates, run_ensemble
from qjump.collision import BathParams, theta_inf
from qjump.experiments import ENSEMBLE_GRID, SEEDS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=200)
    ap.add_argument("--seed", type=int, default=SEEDS[8])
    ap.add_argument("--beta0", type=float, default=2.0)
    args = ap.parse_args(argv)
    params = BathParams(beta0=args.beta0)
    spec = EnsembleSpec(
        "sde-strat",
        ENSEMBLE_GRID,
        params,
        (0.25, 0.5, 0.75, 1.0),
        args.trajectories,
        seed=args.seed,
        initial=(0.0, 0.0, 1.0),
        hamiltonian=False,
        coherence=True,
    )
    summ = run_ensemble(spec)
    ys = coherence_separations(ENSEMBLE_GRID)
    print(f"{'Y':>6} {'quenched':>10} {'stderr':>9} {'annealed':>10}")
    for j in range(1, 17):
        r = ensemble_decay_rates(summ, j)
        ann = params.alpha**2 * (1 - theta_inf(ys[j], params.beta0))
        print(f"{ys[j]:6.2f} {r.mean():10.5f} {r.std(ddof=1) / np.sqrt(r.size):9.1e} {ann:10.5f}")


if __name__ == "__main__":
    main()
