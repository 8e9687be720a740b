"""End-to-end acceptance suite.

Each criterion returns a :class:`CriterionResult`; :func:`run_suite` runs the
selection and :func:`format_table` renders the PASS/FAIL table. Tolerances
that are limited by the O(h^2) discretization scale with (n_ref / n)^2, so the
suite still applies when run on a coarser grid.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bifurcation import kernel_element, kernel_residual, small_mass_scaling
from .continuation import e_curve, m_continuity, sweep
from .eigen import feasibility_threshold, principal_eigenpair
from .errors import DegenerateRegime, GPMassError
from .evolve import PERTURBATION_KINDS, evolve, perturbed_data, stability_experiment
from .grid import Grid, component_h_norm_sq
from .maximizer import (
    MaximizeOptions, constraint_violation, maximize, multi_start,
)
from .model import ConstraintSpec, ModelParams, ScatteringParams, eval_F

N_REF_1D = 1024
N_REF_2D = 128
THRESHOLD_M = -0.5 / math.sqrt(2 * math.pi)
SYMMETRIC_O = 0.19947
FD_TOL = 1e-5


@dataclass
class AcceptanceConfig:
    n: int = N_REF_1D
    n2d: int = N_REF_2D
    L: float = 10.0
    L2d: float = 5.0
    dt: float = 1e-3
    horizon: float = 20.0
    seeds: tuple = (0, 1, 2)
    threads: int = 1

    @property
    def res_factor(self) -> float:
        return (N_REF_1D / self.n) ** 2

    @property
    def res_factor_2d(self) -> float:
        return (N_REF_2D / self.n2d) ** 2

    def model(self, mu1, mu2, beta) -> ModelParams:
        return ModelParams.harmonic(1, self.L, self.n, mu1, mu2, beta)


@dataclass
class CriterionResult:
    cid: str
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    expected_fail: bool = False

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


class _Context:
    """Objects shared between criteria (the defocusing sweep is used twice)."""

    def __init__(self, cfg: AcceptanceConfig):
        self.cfg = cfg

    @cached_property
    def defocusing(self) -> ModelParams:
        return self.cfg.model(-1.0, -1.0, 0.5)

    @cached_property
    def defocusing_solution(self):
        return maximize(self.defocusing, ConstraintSpec(2.5, 1.0, 1.0))

    @cached_property
    def sweep_grid(self):
        T = feasibility_threshold(self.defocusing, 1.0, 1.0)
        return np.linspace(T + 0.05, T + 2.0, 20)

    @cached_property
    def branch(self):
        return sweep(self.defocusing, 1.0, 1.0, self.sweep_grid, fd_step=1e-3)


def c1_eigen(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    g1 = Grid(1, cfg.L, cfg.n)
    e1 = principal_eigenpair(g1, g1.r2)
    g2 = Grid(2, cfg.L2d, cfg.n2d)
    e2 = principal_eigenpair(g2, g2.r2)
    tol1, tol2 = 1e-4 * cfg.res_factor, 1e-3 * cfg.res_factor_2d
    ok = abs(e1.lam - 1.0) <= tol1 and abs(e2.lam - 2.0) <= tol2
    return CriterionResult("1", "eigensolver oracle", ok, {
        "lambda_1d": e1.lam, "tol_1d": tol1, "lambda_2d": e2.lam, "tol_2d": tol2})


def c2_threshold(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    m = cfg.model(-1.0, -1.0, 0.0)
    T = feasibility_threshold(m, 1.0, 1.0)
    s = maximize(m, ConstraintSpec(T, 1.0, 1.0))
    tol_w = 1e-4 * cfg.res_factor
    ok = (abs(s.m_value - THRESHOLD_M) <= 1e-3 and abs(s.omega1 + 1) <= tol_w
          and abs(s.omega2 + 1) <= tol_w and abs(s.gamma) <= 1e-4)
    return CriterionResult("2", "threshold anchor", ok, {
        "M": s.m_value, "omega1": s.omega1, "omega2": s.omega2, "gamma": s.gamma})


REGIME_SAMPLE = ((1.0, -1.0, 0.3), (-1.0, -1.0, 0.5), (1.0, 1.0, 0.2))


def c3_euler_lagrange(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    worst_res = worst_c = 0.0
    min_gamma = math.inf
    for mu1, mu2, beta in REGIME_SAMPLE:
        m = cfg.model(mu1, mu2, beta)
        T = feasibility_threshold(m, 1.0, 1.0)
        for extra in (1e-3, 0.5, 2.0):
            c = ConstraintSpec(T + extra, 1.0, 1.0)
            s = maximize(m, c)
            worst_res = max(worst_res, s.residual)
            worst_c = max(worst_c, constraint_violation(m, s.pair, c))
            min_gamma = min(min_gamma, s.gamma)
    ok = worst_res < 1e-6 and worst_c < 1e-9 and min_gamma > 0
    return CriterionResult("3", "Euler-Lagrange certification", ok, {
        "max_residual": worst_res, "max_constraint_violation": worst_c, "min_gamma": min_gamma})


def c4_monotonicity(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    b = ctx.branch
    inc = np.diff(b.gammas)
    opts = MaximizeOptions(threads=cfg.threads)
    spread = 0.0
    for p in b.points:
        best, _ = multi_start(ctx.defocusing, ConstraintSpec(p.alpha, 1.0, 1.0), opts,
                              seeds=range(8))
        spread = max(spread, best.diagnostics["max_spread"])
    ok = bool(np.all(inc > 0)) and spread < 1e-5 and not b.discontinuities
    return CriterionResult("4", "defocusing monotonicity", ok, {
        "min_gamma_increment": float(inc.min()), "max_multistart_spread": spread,
        "discontinuities": len(b.discontinuities)})


def c5_e_identity(ctx: _Context) -> CriterionResult:
    b = ctx.branch
    mid = len(b.points) // 2
    alpha_star = float(b.alphas[mid])
    _, de, gs = e_curve(b, alpha_star)
    defect = np.abs(de - 0.5 * (1.0 - gs / b.gammas))[1:-1]
    ok = float(defect.max()) < 5e-3 and abs(de[mid]) <= FD_TOL
    return CriterionResult("5", "e-identity", ok, {
        "alpha_star": alpha_star, "max_defect": float(defect.max()),
        "e_prime_at_star": float(de[mid]), "fd_tol": FD_TOL})


def c6_scaling(ctx: _Context) -> CriterionResult:
    m = ctx.cfg.model(1.0, 1.0, 0.2)
    r = small_mass_scaling(m, math.pi / 4, np.logspace(-4, -2, 8))
    ok = abs(r.slope - 0.5) <= 0.05 and r.distances[-1] < 1e-2
    return CriterionResult("6", "small-mass scaling", ok, {
        "slope": r.slope, "anchor_distance": float(r.distances[-1]),
        "ratio": r.ratio, "predicted_ratio": r.predicted_ratio})


THETAS = (0.2, 0.5, math.pi / 4, 1.0, 1.35)


def c7_bifurcation(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    sym = kernel_element(cfg.model(1.0, 1.0, 0.0), math.pi / 4)
    o_ok = abs(sym.o1 - SYMMETRIC_O) <= 1e-4 * cfg.res_factor and abs(sym.o2 - SYMMETRIC_O) <= 1e-4 * cfg.res_factor
    worst, min_nd = 0.0, math.inf
    for beta in (0.0, 0.2):
        m = cfg.model(1.0, 1.0, beta)
        for th in THETAS:
            K = kernel_element(m, th)
            worst = max(worst, kernel_residual(m, K)["field_residual"])
            min_nd = min(min_nd, K.nondeg_value)
    ok = o_ok and worst < 1e-6 and min_nd > 0
    return CriterionResult("7", "bifurcation diagnostics", ok, {
        "o1": sym.o1, "o2": sym.o2, "max_kernel_residual": worst, "min_nondeg": min_nd})


def c8_conservation(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    m, s = ctx.defocusing, ctx.defocusing_solution
    horizon = 1e4 * cfg.dt
    _, base, _ = evolve(m, s.pair, s.gamma, cfg.dt, horizon, 0.1)
    # on the exact standing wave the energy error is at rounding level, so the
    # dt-halving test runs on nearby non-stationary data
    psi0 = perturbed_data(m, s, 0.1, "bump", 0)
    _, coarse, _ = evolve(m, psi0, s.gamma, cfg.dt, horizon, 0.1)
    _, fine, _ = evolve(m, psi0, s.gamma, cfg.dt / 2, horizon, 0.1)
    mass = max(base.max_mass_drift(), coarse.max_mass_drift(), fine.max_mass_drift())
    energy = max(base.max_energy_drift(), coarse.max_energy_drift())
    ratio = coarse.max_energy_drift() / fine.max_energy_drift()
    ok = mass < 1e-10 and energy < 1e-6 and ratio >= 3.5
    return CriterionResult("8", "conservation", ok, {
        "max_mass_drift": mass, "max_energy_drift": energy, "dt_halving_ratio": ratio})


def c9_orbital(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    m, s = ctx.defocusing, ctx.defocusing_solution
    run = lambda args: stability_experiment(s, m, args[0], cfg.horizon, cfg.dt, args[1], args[2])
    t0 = time.perf_counter()
    r0 = run((0.0, "bump", 0))
    slowest = time.perf_counter() - t0
    jobs = [(d, k, seed) for k in PERTURBATION_KINDS for seed in cfg.seeds for d in (1e-3, 5e-4)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            reports = list(pool.map(run, jobs))
    else:
        reports = [run(j) for j in jobs]
    sups = [r.sup_distance for r in reports[0::2]]
    ratios = [a.sup_distance / b.sup_distance for a, b in zip(reports[0::2], reports[1::2])]
    ok = r0.sup_distance < 1e-5 and max(sups) < 0.1 and all(1.5 <= q <= 2.5 for q in ratios)
    return CriterionResult("9", "orbital stability", ok, {
        "unperturbed_sup": r0.sup_distance, "max_sup_distance": max(sups),
        "ratio_range": (min(ratios), max(ratios)), "trajectory_seconds": slowest})


def c10_invariants(ctx: _Context) -> CriterionResult:
    cfg = ctx.cfg
    rng = np.random.default_rng(2024)
    g = Grid(1, cfg.L, cfg.n)
    V = g.r2
    violations = 0
    for _ in range(100):
        k = rng.integers(1, 6)
        f = sum((rng.standard_normal() + 1j * rng.standard_normal())
                * np.exp(-(g.x - rng.uniform(-3, 3)) ** 2 * rng.uniform(0.2, 3)) for _ in range(k))
        if component_h_norm_sq(g, np.abs(f), V) > component_h_norm_sq(g, f, V) * (1 + 1e-12):
            violations += 1
    lap = g.laplacian_matrix
    sym = abs(lap - lap.T).max()
    probes = [rng.standard_normal(g.size) for _ in range(20)]
    neg = all(p @ (lap @ p) < 0 for p in probes)
    s = ScatteringParams(-1.0, 0.5, 0.3)
    u = (rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    ph = np.exp(1j * rng.uniform(0, 2 * np.pi, g.shape))
    F = eval_F(g, u, s)
    even = math.isclose(F, eval_F(g, (-u[0], u[1]), s), rel_tol=1e-14)
    modulus = math.isclose(F, eval_F(g, (u[0] * ph, u[1]), s), rel_tol=1e-12)
    m = ctx.defocusing
    T = feasibility_threshold(m, 1.0, 1.0)
    diffs = m_continuity(m, 1.0, 1.0, T + 0.05, T + 2.0)
    decreasing = all(b < a for a, b in zip(diffs, diffs[1:]))
    ok = violations == 0 and sym == 0 and neg and even and modulus and decreasing
    return CriterionResult("10", "invariant suites", ok, {
        "diamagnetic_violations": violations, "laplacian_asymmetry": float(sym),
        "laplacian_negative": neg, "F_even": even, "F_modulus": modulus,
        "M_continuity_diffs": diffs})


def degenerate_expected_fail(ctx: _Context) -> CriterionResult:
    """A (1, 1, -1) model must be rejected by the regime gate."""
    m = ctx.cfg.model(1.0, 1.0, -1.0)
    try:
        maximize(m, ConstraintSpec(2.5, 1.0, 1.0))
    except DegenerateRegime as exc:
        return CriterionResult("D", "degenerate config rejected", True,
                               {"error": str(exc)}, expected_fail=True)
    return CriterionResult("D", "degenerate config rejected", False, {"error": None},
                           expected_fail=True)


CRITERIA = {
    "1": c1_eigen, "2": c2_threshold, "3": c3_euler_lagrange, "4": c4_monotonicity,
    "5": c5_e_identity, "6": c6_scaling, "7": c7_bifurcation, "8": c8_conservation,
    "9": c9_orbital, "10": c10_invariants,
}


def run_criterion(cid: str, ctx: _Context) -> CriterionResult:
    fn = degenerate_expected_fail if cid == "D" else CRITERIA[cid]
    t0 = time.perf_counter()
    try:
        res = fn(ctx)
    except GPMassError as exc:
        res = CriterionResult(cid, fn.__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
    res.seconds = time.perf_counter() - t0
    return res


def make_context(cfg: AcceptanceConfig | None = None) -> _Context:
    return _Context(cfg or AcceptanceConfig())


def run_suite(cfg: AcceptanceConfig | None = None, only=None, degenerate: bool = False,
              report=None) -> list:
    """Run the selected criteria in order; ``report`` is called after each one."""
    ctx = make_context(cfg)
    ids = list(only) if only else list(CRITERIA)
    if degenerate and "D" not in ids:
        ids.append("D")
    results = []
    for cid in ids:
        res = run_criterion(cid, ctx)
        results.append(res)
        if report is not None:
            report(res)
    return results


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def format_row(r: CriterionResult) -> str:
    tag = r.status + (" (expected-fail)" if r.expected_fail else "")
    detail = ", ".join(f"{k}={_fmt(v)}" for k, v in r.detail.items())
    return f"C{r.cid:<3} {r.title:<32} {tag:<22} {r.seconds:7.1f}s  {detail}"


def format_table(results) -> str:
    lines = [format_row(r) for r in results]
    n_pass = sum(r.passed for r in results)
    lines.append(f"{n_pass}/{len(results)} criteria passed")
    return "\n".join(lines)
