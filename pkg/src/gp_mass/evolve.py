"""Strang-split integrator for the coupled cubic NLS and orbital-stability runs.

One step is: half-step pointwise phase rotation (potential + nonlinearity),
a Crank-Nicolson step for i psi_t = -Lap psi, and another half phase step.
Both substeps are L2 isometries, so masses are conserved up to the accuracy
of the sparse solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .errors import ConfigError, LinearSolveFailure
from .maximizer import MaximizeOptions, SolitarySolution, maximize
from .model import ConstraintSpec, ModelParams, eval_energy, masses

MASS_DRIFT_LIMIT = 1e-6


@dataclass(eq=False)
class EvolutionState:
    pair: tuple
    t: float
    mass1: float
    mass2: float
    energy: float
    gamma_star: float

    @classmethod
    def start(cls, pair, m: ModelParams, gamma_star: float) -> "EvolutionState":
        psi = tuple(np.asarray(p, dtype=complex) for p in pair)
        m.grid.check(*psi)
        q1, q2 = masses(m.grid, psi)
        return cls(psi, 0.0, q1, q2, eval_energy(psi, m, gamma_star), gamma_star)

    def mass_drift(self, m: ModelParams) -> float:
        q1, q2 = masses(m.grid, self.pair)
        return max(abs(q1 - self.mass1) / self.mass1, abs(q2 - self.mass2) / self.mass2)

    def energy_drift(self, m: ModelParams) -> float:
        e = eval_energy(self.pair, m, self.gamma_star)
        return abs(e - self.energy) / max(abs(self.energy), 1e-300)


@lru_cache(maxsize=16)
def _cn_factors(grid, dt):
    lap = grid.laplacian_matrix
    eye = sp.identity(grid.size, dtype=complex, format="csc")
    lhs = (eye - 0.5j * dt * lap).tocsc()
    rhs = (eye + 0.5j * dt * lap).tocsr()
    return splu(lhs), rhs


def _phase(pair, m: ModelParams, gamma_star: float, tau: float):
    s = m.scattering
    a1 = np.abs(pair[0]) ** 2
    a2 = np.abs(pair[1]) ** 2
    th1 = gamma_star * (s.mu1 * a1 + s.beta * a2) - m.V1
    th2 = gamma_star * (s.mu2 * a2 + s.beta * a1) - m.V2
    return pair[0] * np.exp(1j * tau * th1), pair[1] * np.exp(1j * tau * th2)


def step(state: EvolutionState, m: ModelParams, gamma_star: float, dt: float) -> EvolutionState:
    """Advance one Strang step of size dt (negative dt runs backwards)."""
    if dt == 0:
        raise ConfigError("dt must be nonzero")
    lu, rhs = _cn_factors(m.grid, float(dt))
    shape = m.grid.shape
    psi = _phase(state.pair, m, gamma_star, 0.5 * dt)
    psi = tuple(lu.solve(rhs @ p.ravel()).reshape(shape) for p in psi)
    psi = _phase(psi, m, gamma_star, 0.5 * dt)
    if not all(np.all(np.isfinite(p)) for p in psi):
        raise LinearSolveFailure(f"non-finite field at t={state.t + dt:.6g}")
    return EvolutionState(psi, state.t + dt, state.mass1, state.mass2, state.energy, state.gamma_star)


def _h_inner(m: ModelParams, i: int, f, g) -> complex:
    """Complex H inner product int (grad f . grad conj g + V f conj g)."""
    return complex(np.sum(f * np.conj(m.apply_op(i, g))) * m.grid.dv)


def orbital_distance(psi, u, m: ModelParams) -> float:
    """inf over (s1, s2) of ||psi - (e^{i s1} u1, e^{i s2} u2)||_H.

    The optimal phase of each component is arg <psi_i, u_i>_H because u is
    real; the norm is then evaluated on the difference to avoid cancellation.
    """
    m.grid.check(*psi, *u)
    total = 0.0
    for i in range(2):
        z = _h_inner(m, i, psi[i], u[i].astype(complex))
        ph = z / abs(z) if abs(z) > 0 else 1.0
        d = psi[i] - ph * u[i]
        total += float(np.real(_h_inner(m, i, d, d)))
    return float(np.sqrt(max(total, 0.0)))


def h_norm_of(m: ModelParams, pair) -> float:
    return float(np.sqrt(sum(np.real(_h_inner(m, i, p, p)) for i, p in enumerate(pair))))


@dataclass
class TimeSeries:
    t: list = field(default_factory=list)
    mass1: list = field(default_factory=list)
    mass2: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    h_norm_sq: list = field(default_factory=list)
    orbital_distance: list = field(default_factory=list)

    def rows(self):
        for k in range(len(self.t)):
            yield {
                "t": self.t[k], "mass1": self.mass1[k], "mass2": self.mass2[k],
                "energy": self.energy[k],
                "orbital_distance": self.orbital_distance[k] if self.orbital_distance else float("nan"),
            }

    def max_mass_drift(self) -> float:
        q1, q2 = np.array(self.mass1), np.array(self.mass2)
        return float(max(np.max(np.abs(q1 - q1[0])) / q1[0], np.max(np.abs(q2 - q2[0])) / q2[0]))

    def max_energy_drift(self) -> float:
        e = np.array(self.energy)
        return float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300))


def evolve(m: ModelParams, psi0, gamma_star: float, dt: float, horizon: float,
           sample_dt: float = 0.1, reference=None, snapshots=()):
    """Integrate to ``horizon`` and sample conserved quantities.

    Returns ``(final_state, series, snapshot_dict)``. ``reference`` is a real
    pair whose orbital distance is sampled.
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    n_steps = int(round(horizon / dt))
    every = max(int(round(sample_dt / dt)), 1)
    snap_steps = {int(round(ts / dt)): ts for ts in snapshots}
    state = EvolutionState.start(psi0, m, gamma_star)
    series = TimeSeries()
    snaps = {}

    def sample(st):
        q1, q2 = masses(m.grid, st.pair)
        series.t.append(st.t)
        series.mass1.append(q1)
        series.mass2.append(q2)
        series.energy.append(eval_energy(st.pair, m, gamma_star))
        series.h_norm_sq.append(h_norm_of(m, st.pair) ** 2)
        if reference is not None:
            series.orbital_distance.append(orbital_distance(st.pair, reference, m))

    sample(state)
    for k in range(1, n_steps + 1):
        state = step(state, m, gamma_star, dt)
        state.t = k * dt
        if k % every == 0 or k == n_steps:
            sample(state)
            drift = max(abs(series.mass1[-1] - state.mass1) / state.mass1,
                        abs(series.mass2[-1] - state.mass2) / state.mass2)
            if drift > MASS_DRIFT_LIMIT:
                raise LinearSolveFailure(f"mass drift {drift:.2e} at t={state.t:.4g}")
        if k in snap_steps:
            snaps[snap_steps[k]] = tuple(p.copy() for p in state.pair)
    return state, series, snaps


# -- perturbations ---------------------------------------------------------

PERTURBATION_KINDS = ("bump", "rotation", "tangent")


def _smooth_bump(m: ModelParams, rng, phi):
    coords = [c / m.grid.L * 4.0 for c in m.grid.coords]
    f = np.zeros(m.grid.shape, dtype=complex)
    for deg in range(0, 4):
        if m.grid.dim == 1:
            f = f + (rng.standard_normal() + 1j * rng.standard_normal()) * coords[0] ** deg
        else:
            for a in range(deg + 1):
                f = f + (rng.standard_normal() + 1j * rng.standard_normal()) \
                    * coords[0] ** a * coords[1] ** (deg - a)
    return f * phi


def branch_tangent(m: ModelParams, s: SolitarySolution, step: float = 1e-3,
                   opts: MaximizeOptions | None = None):
    """d(u1, u2)/d alpha at s by central differences along the branch."""
    opts = opts or MaximizeOptions()
    up = maximize(m, ConstraintSpec(s.alpha + step, s.rho1, s.rho2), s.pair, opts)
    dn = maximize(m, ConstraintSpec(s.alpha - step, s.rho1, s.rho2), s.pair, opts)
    return tuple((a - b) / (2 * step) for a, b in zip(up.pair, dn.pair))


def perturbed_data(m: ModelParams, s: SolitarySolution, delta: float, kind: str,
                   seed: int = 0, tangent=None):
    """Initial data at H-distance ``delta`` from the standing-wave profile s.pair."""
    u = tuple(np.asarray(p, dtype=complex) for p in s.pair)
    if delta == 0:
        return u
    rng = np.random.default_rng(seed)
    phis = [ep.phi for ep in m.eigenpairs]
    if kind == "bump":
        d = tuple(_smooth_bump(m, rng, p) for p in phis)
        return tuple(a + delta * b / h_norm_of(m, d) for a, b in zip(u, d))
    if kind == "tangent":
        v = tangent if tangent is not None else branch_tangent(m, s)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 2)) * rng.choice([-1, 1])
        d = tuple(ph * vi for ph, vi in zip(phases, v))
        return tuple(a + delta * b / h_norm_of(m, d) for a, b in zip(u, d))
    if kind == "rotation":
        # rotate each component toward its ground state inside the mass sphere
        rho = (s.rho1, s.rho2)
        dirs = []
        for i in range(2):
            e = phis[i] - np.sum(phis[i] * s.pair[i]) * m.grid.dv / rho[i] * s.pair[i]
            e = e / np.sqrt(np.sum(e * e) * m.grid.dv)
            dirs.append(np.exp(1j * rng.uniform(0, 2 * np.pi)) * np.sqrt(rho[i]) * e)

        def rotated(tau):
            return tuple(np.cos(tau) * a + np.sin(tau) * b for a, b in zip(u, dirs))

        def gap(tau):
            return h_norm_of(m, tuple(x - y for x, y in zip(rotated(tau), u))) - delta

        hi = 1e-3
        while gap(hi) < 0:
            hi *= 2
            if hi > np.pi / 2:
                raise ConfigError("rotation cannot reach the requested delta")
        return rotated(brentq(gap, 0.0, hi, xtol=1e-15))
    raise ConfigError(f"unknown perturbation kind {kind!r}; expected {PERTURBATION_KINDS}")


@dataclass
class StabilityReport:
    delta: float
    horizon: float
    sup_distance: float
    distance_series: list
    times: list
    kind: str
    seed: int
    gamma_star: float
    exploratory: bool = False
    max_mass_drift: float = 0.0
    max_energy_drift: float = 0.0
    series: TimeSeries | None = None


def stability_experiment(s: SolitarySolution, m: ModelParams, delta: float, horizon: float,
                         dt: float = 1e-3, perturbation_kind: str = "bump", seed: int = 0,
                         sample_dt: float = 0.1, exploratory: bool = False,
                         tangent=None) -> StabilityReport:
    """Perturb the standing wave by ``delta`` (H-norm), evolve, track the orbital distance."""
    psi0 = perturbed_data(m, s, delta, perturbation_kind, seed, tangent)
    _, series, _ = evolve(m, psi0, s.gamma, dt, horizon, sample_dt, reference=s.pair)
    dist = series.orbital_distance
    return StabilityReport(
        delta=delta, horizon=horizon, sup_distance=float(max(dist)),
        distance_series=list(dist), times=list(series.t), kind=perturbation_kind,
        seed=seed, gamma_star=s.gamma, exploratory=exploratory,
        max_mass_drift=series.max_mass_drift(), max_energy_drift=series.max_energy_drift(),
        series=series,
    )


def energy_trap(m: ModelParams, s: SolitarySolution, psi0, alpha_bar: float, dt: float,
                horizon: float, sample_dt: float = 0.1, opts: MaximizeOptions | None = None):
    """Check that data below the energy barrier at alpha_bar never reaches that budget.

    The barrier is alpha_bar/2 - gamma* M(alpha_bar, Q(psi1), Q(psi2)).
    Returns a dict with the barrier, the initial energy and the largest
    sampled ||Psi(t)||_H^2.
    """
    q1, q2 = masses(m.grid, psi0)
    bar = maximize(m, ConstraintSpec(alpha_bar, q1, q2), None, opts)
    barrier = 0.5 * alpha_bar - s.gamma * bar.m_value
    e0 = eval_energy(psi0, m, s.gamma)
    h0 = h_norm_of(m, psi0) ** 2
    _, series, _ = evolve(m, psi0, s.gamma, dt, horizon, sample_dt)
    return {
        "alpha_bar": alpha_bar,
        "barrier": barrier,
        "initial_energy": e0,
        "initial_h_norm_sq": h0,
        "hypotheses": bool(h0 < alpha_bar and e0 < barrier),
        "max_h_norm_sq": float(max(series.h_norm_sq)),
        "trapped": bool(max(series.h_norm_sq) < alpha_bar),
    }
