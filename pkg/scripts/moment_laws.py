"""Mean-equation moments against the closed-form laws, on boxes of increasing width.

Shows where the periodic box stops representing the free line: the kinetic
law is exact on every box, the position moment needs room for the spreading tails.
"""

import numpy as np
from scipy import stats

from qjump.annealed import predicted_moments, solve_annealed
from qjump.collision import BathParams
from qjump.operators import GridSpec, make_gaussian_state

TIMES = (0.5, 1.0, 1.5, 2.0)


def tail_fraction(t, params, rho0, L):
    """Share of the predicted second moment carried by |X| > L for a Gaussian with that variance."""
    _, q = predicted_moments(rho0, params, t)
    s = np.sqrt(q)
    inside = stats.norm.expect(lambda x: x * x, scale=s, lb=-L, ub=L)
    return 1.0 - inside / q


def main():
    params = BathParams()
    print(f"{'L':>4} {'n':>5} {'t':>5} {'K rel err':>11} {'Q rel err':>11} {'tail share':>11}")
    for L, n in ((10.0, 256), (16.0, 256), (20.0, 512)):
        grid = GridSpec(L, n)
        rho0 = make_gaussian_state(grid, 0.0, 0.0, 0.5)
        run = solve_annealed(rho0, params, TIMES)
        for t, rec in zip(TIMES, run.records):
            k, q = predicted_moments(rho0, params, t)
            print(
                f"{L:4g} {n:5d} {t:5.2f} {rec.kinetic_energy / k - 1:11.2e} "
                f"{rec.position_moment / q - 1:11.2e} {tail_fraction(t, params, rho0, L):11.2e}"
            )


if __name__ == "__main__":
    main()
