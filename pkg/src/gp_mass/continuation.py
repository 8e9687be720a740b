"""Branch tracing in alpha at fixed masses and the gamma-monotonicity criterion."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .eigen import feasibility_threshold
from .errors import ConfigError, GPMassError, OutOfRange
from .maximizer import MaximizeOptions, SolitarySolution, l2_distance, maximize
from .model import ConstraintSpec, ModelParams, require_nondeg

log = logging.getLogger(__name__)

BRANCH_JUMP = 1e-2


@dataclass
class BranchCurve:
    rho1: float
    rho2: float
    points: list
    discontinuities: list = field(default_factory=list)

    def __post_init__(self):
        a = self.alphas
        if len(a) > 1 and np.any(np.diff(a) <= 0):
            raise ConfigError("branch alphas must be strictly increasing")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.points])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.gamma for p in self.points])

    @property
    def m_values(self) -> np.ndarray:
        return np.array([p.m_value for p in self.points])

    @property
    def omegas(self):
        return (np.array([p.omega1 for p in self.points]),
                np.array([p.omega2 for p in self.points]))

    @property
    def has_stencils(self) -> bool:
        return bool(self.points) and all("fd" in p.diagnostics for p in self.points)

    def _stencil_derivative(self, key):
        out = []
        for p in self.points:
            fd = p.diagnostics["fd"]
            d, v = fd["step"], fd[key]
            if fd["kind"] == "central":
                out.append((v[1] - v[0]) / (2 * d))
            else:
                out.append((-3 * v[0] + 4 * v[1] - v[2]) / (2 * d))
        return np.array(out)

    @property
    def m_derivative(self) -> np.ndarray:
        """dM/dalpha: local stencils when recorded, else differences across the grid."""
        if self.has_stencils:
            return self._stencil_derivative("M")
        return _derivative(self.m_values, self.alphas)

    @property
    def gamma_derivative(self) -> np.ndarray:
        if self.has_stencils:
            return self._stencil_derivative("gamma")
        return _derivative(self.gammas, self.alphas)

    def omega_trend(self) -> np.ndarray:
        """omega1' rho1 + omega2' rho2 along the branch."""
        w1, w2 = self.omegas
        return _derivative(w1, self.alphas) * self.rho1 + _derivative(w2, self.alphas) * self.rho2


def _derivative(y, x):
    if len(x) < 2:
        return np.full(len(x), np.nan)
    # central differences inside, one-sided second-order at the ends
    return np.gradient(y, x, edge_order=2 if len(x) > 2 else 1)


def _solve_point(args):
    m, c, opts, init = args
    return maximize(m, c, init, opts)


def _add_stencil(m, sol, T, step, opts):
    """Record M and gamma at alpha +- step (forward stencil near threshold)."""
    a = sol.alpha
    if a - step > T * (1 + 1e-9):
        kind, alphas = "central", (a - step, a + step)
    else:
        kind, alphas = "forward", (a, a + step, a + 2 * step)
    Ms, gs = [], []
    for x in alphas:
        if x == a:
            s2 = sol
        else:
            s2 = maximize(m, ConstraintSpec(x, sol.rho1, sol.rho2),
                          sol.pair if sol.gamma > 0 else None, opts)
        Ms.append(s2.m_value)
        gs.append(s2.gamma)
    sol.diagnostics["fd"] = {"kind": kind, "step": step, "M": Ms, "gamma": gs}


def sweep(m: ModelParams, rho1: float, rho2: float, alpha_grid, opts: MaximizeOptions | None = None,
          mode: str = "warm", check_jumps: bool = True, fd_step: float | None = None) -> BranchCurve:
    """Solve along an increasing alpha grid.

    ``mode="warm"`` chains each solve from the previous maximizer.
    ``mode="cold"`` solves every point independently (optionally in parallel).
    With ``check_jumps`` each warm point is compared against a cold start and
    disagreements above 1e-2 (L2) are recorded in ``discontinuities``.
    With ``fd_step`` every point also gets a local three-point stencil in
    alpha, used for dM/dalpha and gamma'.
    """
    opts = opts or MaximizeOptions()
    require_nondeg(m.scattering)
    grid = np.asarray(alpha_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("alpha_grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("alpha_grid must be strictly increasing")
    T = feasibility_threshold(m, rho1, rho2)
    if grid[0] < T * (1 - opts.ctol):
        raise ConfigError(f"alpha_grid starts below the threshold {T:.12g}")

    points: list[SolitarySolution] = []
    jumps = []
    if mode == "cold":
        work = [(m, ConstraintSpec(a, rho1, rho2), opts, None) for a in grid]
        try:
            if opts.threads > 1:
                with ThreadPoolExecutor(opts.threads) as pool:
                    points = list(pool.map(_solve_point, work))
            else:
                points = [_solve_point(w) for w in work]
        except GPMassError as exc:
            raise type(exc)(f"cold sweep failed: {exc}") from exc
        if fd_step:
            for sol in points:
                _add_stencil(m, sol, T, fd_step, opts)
        return BranchCurve(rho1, rho2, points)
    if mode != "warm":
        raise ConfigError(f"unknown sweep mode {mode!r}")

    init = None
    for a in grid:
        c = ConstraintSpec(a, rho1, rho2)
        try:
            sol = maximize(m, c, init, opts)
        except GPMassError as exc:
            raise type(exc)(f"at alpha={a:.12g}: {exc}") from exc
        if check_jumps and init is not None:
            cold = maximize(m, c, None, opts)
            d = l2_distance(m, sol.pair, cold.pair)
            sol.diagnostics["cold_distance"] = d
            if d > BRANCH_JUMP:
                log.warning("branch discontinuity at alpha=%.6g (warm/cold distance %.3g)", a, d)
                jumps.append({"alpha": float(a), "distance": d,
                              "cold_M": cold.m_value, "warm_M": sol.m_value})
        if fd_step:
            _add_stencil(m, sol, T, fd_step, opts)
        points.append(sol)
        # the threshold point carries gamma = 0 and no curvature information
        init = sol.pair if sol.gamma > 0 else None
    return BranchCurve(rho1, rho2, points, jumps)


def e_curve(b: BranchCurve, alpha_star: float):
    """e(alpha) = alpha/2 - gamma* M(alpha) with gamma* = gamma(alpha*).

    Returns ``(e_values, e_derivatives, gamma_star)``.
    """
    a = b.alphas
    if len(a) < 3:
        raise OutOfRange("e_curve needs at least three branch points")
    if not a[0] <= alpha_star <= a[-1]:
        raise OutOfRange(f"alpha*={alpha_star} outside the branch range [{a[0]}, {a[-1]}]")
    gamma_star = float(np.interp(alpha_star, a, b.gammas))
    e = 0.5 * a - gamma_star * b.m_values
    return e, 0.5 - gamma_star * b.m_derivative, gamma_star


def e_identity_defect(b: BranchCurve, alpha_star: float) -> np.ndarray:
    """|e'(alpha) - (1 - gamma*/gamma(alpha))/2| at every branch point."""
    _, de, gs = e_curve(b, alpha_star)
    return np.abs(de - 0.5 * (1.0 - gs / b.gammas))


def truncation_estimate(b: BranchCurve) -> float:
    """Rough size of the central-difference error in gamma'.

    step**2 / 6 times the third derivative of gamma, the latter taken from
    third differences on the grid; step is the stencil actually used.
    """
    g, a = b.gammas, b.alphas
    if len(a) < 4:
        return 0.0
    h = float(np.mean(np.diff(a)))
    step = b.points[0].diagnostics["fd"]["step"] if b.has_stencils else h
    g3 = np.max(np.abs(np.diff(g, 3))) / h ** 3
    return float(step ** 2 / 6.0 * g3)


@dataclass
class StabilityVerdict:
    flags: list
    gamma_prime: np.ndarray
    margin: float
    monotone_window: tuple | None

    @property
    def stable(self) -> np.ndarray:
        return np.array([f == "stable" for f in self.flags])


def stability_verdict(b: BranchCurve, margin: float | None = None) -> StabilityVerdict:
    """Flag branch points where gamma is increasing beyond ``margin``.

    The criterion is one-sided: points are either "stable" or
    "inconclusive", never "unstable".
    """
    if len(b.points) < 3:
        raise ConfigError("stability_verdict needs at least three branch points")
    gp = b.gamma_derivative
    if margin is None:
        margin = 10.0 * truncation_estimate(b)
    margin = max(float(margin), 1e-12)
    flags = ["stable" if g > margin else "inconclusive" for g in gp]
    best, run_start, window = 0, None, None
    for k, f in enumerate(flags + ["inconclusive"]):
        if f == "stable" and run_start is None:
            run_start = k
        elif f != "stable" and run_start is not None:
            if k - run_start > best:
                best = k - run_start
                window = (float(b.alphas[run_start]), float(b.alphas[k - 1]))
            run_start = None
    return StabilityVerdict(flags, gp, margin, window)


def m_continuity(m: ModelParams, rho1, rho2, lo, hi, levels=(5, 9, 17, 33),
                 opts: MaximizeOptions | None = None):
    """Max |M(a_{k+1}) - M(a_k)| on successively refined uniform grids of [lo, hi]."""
    out = []
    for n in levels:
        b = sweep(m, rho1, rho2, np.linspace(lo, hi, n), opts, check_jumps=False)
        out.append(float(np.max(np.abs(np.diff(b.m_values)))))
    return out


def invert_mass(m: ModelParams, b: BranchCurve, m1: float, m2: float,
                opts: MaximizeOptions | None = None, tol: float = 1e-10) -> SolitarySolution:
    """Find the branch point whose physical masses gamma*rho_i equal (m1, m2).

    Bisection in alpha restricted to the monotone window of the branch.
    """
    opts = opts or MaximizeOptions()
    if not np.isclose(m1 * b.rho2, m2 * b.rho1, rtol=1e-9):
        raise ConfigError("target masses must have the ratio rho1:rho2 of the branch")
    verdict = stability_verdict(b)
    if verdict.monotone_window is None:
        raise OutOfRange("branch has no monotone window")
    lo_a, hi_a = verdict.monotone_window
    target = m1 / b.rho1
    a, g = b.alphas, b.gammas
    mask = (a >= lo_a) & (a <= hi_a)
    if not g[mask].min() <= target <= g[mask].max():
        raise OutOfRange(f"gamma={target:.6g} not reached inside the monotone window")
    idx = np.where(mask)[0]
    k = idx[np.searchsorted(g[idx], target) - 1] if target > g[idx[0]] else idx[0]
    lo, hi = a[k], a[min(k + 1, idx[-1])]
    init = b.points[k].pair
    sol = b.points[k]
    for _ in range(200):
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        sol = maximize(m, ConstraintSpec(mid, b.rho1, b.rho2), init, replace(opts, starts=1))
        init = sol.pair
        if sol.gamma < target:
            lo = mid
        else:
            hi = mid
    return sol
