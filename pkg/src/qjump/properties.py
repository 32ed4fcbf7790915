"""Randomised checks of the operator identities and inequalities behind the moment bounds.

Each check draws a random smooth mixed state (or vector pair), evaluates both
sides and records a violation with enough data to rebuild the counterexample.
Equalities use a relative tolerance of 1e-8; inequalities allow an absolute
slack of 1e-10 (a relative one where the right side is of the order of
finite-difference error).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from .environment import RngStream
from .errors import PreconditionError
from .operators import (
    DEFAULT_TOLERANCES,
    DensityKernel,
    GridSpec,
    _free_values,
    boundary_mass,
    kinetic_energy,
    mixed_moment,
    outer_kernel,
    position_moment,
    singular_values,
    schatten_from_singular_values,
)

EQ_TOL = 1e-8
INEQ_SLACK = 1e-10
FD_STEP = 1e-4
FD_TOL = 1e-5
MIN_NYQUIST = 15.0
# mass allowed within the boundary points when checking line identities of the
# free flow; the seam perturbs them by a few times this mass, far below FD_TOL
SEAM_MASS = 1e-9
P_VALUES = (1.0, 1.5, 2.0, 3.0, np.inf)

CHECKS = (
    "dist_op.i",
    "dist_op.ii",
    "mix",
    "schatten.i",
    "schatten.ii",
    "schatten.iii",
    "schatten.iv",
    "kin_eq.i",
    "kin_eq.ii",
    "kin_eq.iii",
    "free_case.position",
    "free_case.mixed",
    "rho_and_T",
)


@dataclass
class Violation:
    check: str
    trial: int
    lhs: float
    rhs: float
    payload: dict = field(repr=False)


@dataclass
class PropertyReport:
    trials: int
    counts: dict
    violations: list
    worst_margin: dict

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary_lines(self) -> list[str]:
        lines = []
        for name in CHECKS:
            bad = sum(v.check == name for v in self.violations)
            lines.append(f"{name:20s} evaluated {self.counts.get(name, 0):6d}  violations {bad}  worst {self.worst_margin.get(name, 0.0):.2e}")
        return lines


# -- random objects ---------------------------------------------------------------------


def random_packets(grid: GridSpec, gen: np.random.Generator, count: int) -> tuple[np.ndarray, dict]:
    """``count`` smooth vectors, each a sum of two Gaussian packets with random phases."""
    L = grid.half_width
    centers = gen.uniform(-0.2 * L, 0.2 * L, (count, 2))
    momenta = gen.uniform(-2.0, 2.0, (count, 2))
    widths = gen.uniform(0.4, 1.2, (count, 2))
    amps = gen.normal(size=(count, 2)) + 1j * gen.normal(size=(count, 2))
    x = grid.positions
    vecs = np.zeros((count, grid.n_points), complex)
    for j in range(count):
        for a in range(2):
            vecs[j] += amps[j, a] * np.exp(
                -((x - centers[j, a]) ** 2) / (4 * widths[j, a] ** 2) + 1j * momenta[j, a] * x
            )
    meta = {"centers": centers, "momenta": momenta, "widths": widths, "amplitudes": amps}
    return vecs, meta


def random_state(grid: GridSpec, gen: np.random.Generator) -> tuple[DensityKernel, dict]:
    """Random rank 1..8 positive unit-trace state with smooth eigenvectors."""
    r = int(gen.integers(1, 9))
    vecs, meta = random_packets(grid, gen, r)
    # orthonormalise in L2(dx)
    q, _ = np.linalg.qr(vecs.T * np.sqrt(grid.spacing))
    psi = q.T / np.sqrt(grid.spacing)
    lam = gen.dirichlet(np.ones(r))
    values = (psi.T * lam) @ psi.conj()
    values = 0.5 * (values + values.conj().T)
    meta.update(rank=r, weights=lam)
    return DensityKernel._wrap(grid, values), {"state": meta, "eigvecs": psi, "eigvals": lam}


def unit(grid: GridSpec, v: np.ndarray) -> np.ndarray:
    return v / np.sqrt(np.vdot(v, v).real * grid.spacing)


def inner(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b) * grid.spacing)


def apply_p(grid: GridSpec, v: np.ndarray) -> np.ndarray:
    """``P = -i d/dX`` applied along the first axis."""
    k = grid.momentum_nodes
    shape = (-1,) + (1,) * (np.ndim(v) - 1)
    return sfft.ifft(k.reshape(shape) * sfft.fft(v, axis=0), axis=0)


def mixed_functional(grid: GridSpec, values: np.ndarray, g: np.ndarray) -> float:
    """``Tr(P rho g + g rho P)`` for a multiplication operator ``g``."""
    prho = apply_p(grid, values)
    return float(2.0 * np.real(np.sum(g * np.diagonal(prho))) * grid.spacing)


@dataclass(frozen=True)
class GaussianSymbol:
    """``theta(Y) = sum_j c_j exp(2 i a_j Y - b_j Y^2)``; smooth with integrable Fourier transform."""

    c: tuple
    a: tuple
    b: tuple

    def __call__(self, y):
        y = np.asarray(y, float)
        out = np.zeros(y.shape, complex)
        for c, a, b in zip(self.c, self.a, self.b):
            out += c * np.exp(2j * a * y - b * y * y)
        return out

    def derivatives_at_zero(self) -> tuple[complex, complex, complex]:
        t0 = sum(self.c)
        t1 = sum(c * 2j * a for c, a in zip(self.c, self.a))
        t2 = sum(c * ((2j * a) ** 2 - 2 * b) for c, a, b in zip(self.c, self.a, self.b))
        return complex(t0), complex(t1), complex(t2)

    def fourier(self, k):
        """Unitary-convention transform ``(2 pi)^{-1/2} int theta(Y) e^{-ikY} dY``."""
        k = np.asarray(k, float)
        out = np.zeros(k.shape, complex)
        for c, a, b in zip(self.c, self.a, self.b):
            out += c / np.sqrt(2 * b) * np.exp(-((k - 2 * a) ** 2) / (4 * b))
        return out

    def fourier_l1(self) -> float:
        """``(2 pi)^{-1/2} ||theta_hat||_1`` by adaptive quadrature."""
        f = lambda k: abs(self.fourier(k))
        pts = sorted(2 * a for a in self.a)
        lo, hi = pts[0] - 40.0, pts[-1] + 40.0
        val = integrate.quad(f, lo, hi, points=pts if len(pts) > 1 else None, limit=400, epsabs=1e-14)[0]
        val += integrate.quad(f, -np.inf, lo)[0] + integrate.quad(f, hi, np.inf)[0]
        return val / np.sqrt(2 * np.pi)


def random_symbol(gen: np.random.Generator) -> GaussianSymbol:
    m = int(gen.integers(1, 3))
    c = tuple(complex(z) for z in (gen.normal(size=m) + 1j * gen.normal(size=m)) / np.sqrt(2 * m))
    a = tuple(float(z) for z in gen.uniform(-1.5, 1.5, m))
    b = tuple(float(z) for z in gen.uniform(0.3, 2.0, m))
    return GaussianSymbol(c, a, b)


# -- the suite --------------------------------------------------------------------------


class _Recorder:
    def __init__(self):
        self.counts = {name: 0 for name in CHECKS}
        self.worst = {name: -np.inf for name in CHECKS}
        self.violations = []

    def equal(self, name, trial, lhs, rhs, payload, tol=EQ_TOL):
        lhs, rhs = complex(lhs), complex(rhs)
        margin = abs(lhs - rhs) - tol * max(1.0, abs(rhs))
        self._log(name, trial, lhs, rhs, margin, payload)

    def leq(self, name, trial, lhs, rhs, payload, slack=INEQ_SLACK):
        margin = float(lhs) - float(rhs) - slack
        self._log(name, trial, lhs, rhs, margin, payload)

    def _log(self, name, trial, lhs, rhs, margin, payload):
        self.counts[name] += 1
        self.worst[name] = max(self.worst[name], margin)
        if margin > 0:
            lv = lhs.real if isinstance(lhs, complex) and lhs.imag == 0 else lhs
            rv = rhs.real if isinstance(rhs, complex) and rhs.imag == 0 else rhs
            self.violations.append(Violation(name, trial, lv, rv, payload))


def appendix_property_suite(
    trials: int,
    rng: RngStream,
    grid: GridSpec | None = None,
    *,
    min_trials: int = 100,
) -> PropertyReport:
    if trials < min_trials:
        raise PreconditionError(f"at least {min_trials} trials are required")
    grid = grid or GridSpec(10.0, 256)
    # random packets carry momenta up to about 2 + 3 (symbol shift) + a few widths
    if np.pi / grid.spacing < MIN_NYQUIST:
        raise PreconditionError(f"grid too coarse: Nyquist momentum {np.pi / grid.spacing:.3g} < {MIN_NYQUIST}")
    gen = rng.generator()
    rec = _Recorder()
    dx = grid.spacing
    x = grid.positions
    for trial in range(trials):
        rho, meta = random_state(grid, gen)
        payload = {"seed": rng.seed, "stream_id": rng.stream_id, "trial": trial, **meta["state"]}
        # dist_op (i): non-normalised rank one
        (phi, psi), vmeta = random_packets(grid, gen, 2)
        pay_v = {**payload, "vectors": vmeta}
        nphi, npsi = np.sqrt(inner(grid, phi, phi).real), np.sqrt(inner(grid, psi, psi).real)
        s = singular_values(outer_kernel(grid, phi, psi))
        for p in P_VALUES:
            rec.equal("dist_op.i", trial, schatten_from_singular_values(s, p), nphi * npsi, {**pay_v, "p": p})
        # dist_op (ii): unit vectors; ±phi excluded by construction (a.s.)
        up, uq = unit(grid, phi), unit(grid, psi)
        if trial % 4 == 0:
            # near-coincident pair exercises the small-distance regime
            uq = unit(grid, up + 1e-3 * uq)
        diff = DensityKernel._wrap(grid, np.outer(up, up.conj()) - np.outer(uq, uq.conj()))
        s = singular_values(diff)
        ov = abs(inner(grid, up, uq)) ** 2
        dist = np.sqrt(inner(grid, up - uq, up - uq).real)
        for p in P_VALUES:
            exact = 2.0 ** (1.0 / p) * np.sqrt(max(1.0 - ov, 0.0))
            norm = schatten_from_singular_values(s, p)
            rec.equal("dist_op.ii", trial, norm, exact, {**pay_v, "p": p})
            rec.leq("dist_op.ii", trial, exact, 2.0 ** (1.0 / p) * dist, {**pay_v, "p": p})
        # lem:mix with g = X and a random bounded continuous g
        K = kinetic_energy(rho)
        for g in (x, np.tanh(gen.uniform(0.2, 2.0) * (x - gen.uniform(-2, 2))) * gen.uniform(0.5, 3.0)):
            lhs = mixed_functional(grid, rho.values, g)
            gg = float(np.real(np.sum(g * g * np.diagonal(rho.values))) * dx)
            rec.leq("mix", trial, abs(lhs), 2.0 * np.sqrt(gg * K), payload)
        # eigen-sum form of the same functional
        psi_j, lam = meta["eigvecs"], meta["eigvals"]
        eig_sum = sum(2 * l * np.real(inner(grid, x * v, apply_p(grid, v))) for l, v in zip(lam, psi_j))
        rec.equal("mix", trial, mixed_moment(rho), eig_sum, payload)
        # prop:Schatten on a random non-Hermitian kernel
        A = DensityKernel._wrap(grid, rho.values @ np.diag(np.exp(1j * gen.uniform(0, 2 * np.pi, grid.n_points))))
        sA = singular_values(A)
        sAh = singular_values(DensityKernel._wrap(grid, A.values.conj().T))
        u_phase = np.exp(1j * gen.uniform(-3, 3) * x)
        t_free = float(gen.uniform(0.0, 2.0))
        Uf = _free_values(grid, A.values * u_phase[:, None] * u_phase.conj()[None, :], t_free)
        sU = singular_values(DensityKernel._wrap(grid, Uf))
        sym = random_symbol(gen)
        bound = sym.fourier_l1()
        sT = singular_values(DensityKernel._wrap(grid, A.values * sym(grid.separations)))
        gam = gen.uniform(-1.0, 1.0) * np.cos(gen.uniform(0.2, 3.0) * x + gen.uniform(0, 6))
        gsup = float(np.max(np.abs(gam)))
        sGl = singular_values(DensityKernel._wrap(grid, gam[:, None] * A.values))
        sGr = singular_values(DensityKernel._wrap(grid, A.values * gam[None, :]))
        pay_s = {**payload, "symbol": sym, "free_time": t_free}
        for p in P_VALUES:
            nA = schatten_from_singular_values(sA, p)
            rec.equal("schatten.i", trial, schatten_from_singular_values(sAh, p), nA, {**pay_s, "p": p})
            rec.equal("schatten.ii", trial, schatten_from_singular_values(sU, p), nA, {**pay_s, "p": p})
            rec.leq("schatten.iii", trial, schatten_from_singular_values(sT, p), bound * nA, {**pay_s, "p": p})
            rec.leq("schatten.iv", trial, schatten_from_singular_values(sGl, p), gsup * nA, {**pay_s, "p": p})
            rec.leq("schatten.iv", trial, schatten_from_singular_values(sGr, p), gsup * nA, {**pay_s, "p": p})
        # kin_eq on a positive state
        th = DensityKernel._wrap(grid, rho.values * sym(grid.separations))
        t0, t1, t2 = sym.derivatives_at_zero()
        Q, M = position_moment(rho), mixed_moment(rho)
        mean_p = float(np.real(np.sum(np.diagonal(apply_p(grid, rho.values)))) * dx)
        mean_x = float(np.real(np.sum(x * np.diagonal(rho.values))) * dx)
        tr = float(np.real(np.sum(np.diagonal(rho.values))) * dx)
        q_th = complex(np.sum(x * x * np.diagonal(th.values)) * dx)
        rec.equal("kin_eq.i", trial, q_th, t0 * Q, pay_s)
        k_th = complex(np.sum(grid.momentum_nodes**2 * np.diagonal(sfft.ifft(sfft.fft(th.values, axis=0), axis=1))) * dx)
        rec.equal("kin_eq.ii", trial, k_th, t0 * K - 2j * t1 * mean_p - t2 * tr, pay_s)
        prho = apply_p(grid, th.values)
        # Tr(P th X + X th P) = Tr(P th X) + Tr(P th^dagger X)^*, written for a non-Hermitian th
        m_th = complex(np.sum(x * np.diagonal(prho)) * dx) + complex(
            np.sum(x * np.diagonal(apply_p(grid, th.values.conj().T))) * dx
        ).conjugate()
        rec.equal("kin_eq.iii", trial, m_th, t0 * M - 2j * t1 * mean_x, pay_s)
        # free_case: centred differences of the exact free flow
        # the identities hold on the line; shorten t until the flowed state stays off the seam
        t_drawn = t = float(gen.uniform(0.0, 1.0))
        while t > FD_STEP and _boundary_mass_values(grid, _free_values(grid, rho.values, t + FD_STEP)) > SEAM_MASS:
            t *= 0.5
        r_p = _free_values(grid, rho.values, t + FD_STEP)
        r_m = _free_values(grid, rho.values, t - FD_STEP) if t > FD_STEP else None
        r_t = DensityKernel._wrap(grid, _free_values(grid, rho.values, t))
        if r_m is not None:
            dq = (_q(grid, r_p) - _q(grid, r_m)) / (2 * FD_STEP)
            dm = (_m(grid, r_p) - _m(grid, r_m)) / (2 * FD_STEP)
            rec.equal("free_case.position", trial, dq, mixed_moment(r_t), {**payload, "t": t, "t_drawn": t_drawn}, tol=FD_TOL)
            rec.equal("free_case.mixed", trial, dm, 2.0 * kinetic_energy(r_t), {**payload, "t": t, "t_drawn": t_drawn}, tol=FD_TOL)
        # rho_and_T
        for tt in (0.01, 0.1, 1.0):
            d = _free_values(grid, rho.values, tt) - rho.values
            s1 = float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T) * dx)).sum())
            rec.leq("rho_and_T", trial, s1, 2.0 * np.sqrt(K * tt), {**payload, "t": tt})
    return PropertyReport(trials, rec.counts, rec.violations, rec.worst)


def _boundary_mass_values(grid, values):
    return boundary_mass(DensityKernel._wrap(grid, values), DEFAULT_TOLERANCES.boundary_points)


def _q(grid, values):
    return float(np.real(np.sum(grid.positions**2 * np.diagonal(values))) * grid.spacing)


def _m(grid, values):
    return mixed_moment(DensityKernel._wrap(grid, values))
