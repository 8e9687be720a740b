"""Maximization of F over {Q(u_i) = rho_i, ||u||_H^2 = alpha}.

The ascent works in the energy (H) metric: every L2 gradient g is mapped to
its Riesz representer (-Lap + V)^{-1} g through cached sparse LU factors,
which removes the stiffness of the discrete Laplacian from the iteration.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .eigen import feasibility_threshold
from .errors import (
    ConfigError,
    InfeasibleConstraint,
    NoConvergence,
    NonpositiveGamma,
    RetractFailure,
    SingularFit,
)
from .grid import integrate
from .model import ConstraintSpec, ModelParams, eval_F, grad_F, masses, require_nondeg

log = logging.getLogger(__name__)


@dataclass
class MaximizeOptions:
    gtol: float = 1e-8
    ctol: float = 1e-10
    rtol: float = 1e-6
    max_iter: int = 20000
    armijo: float = 1e-4
    polish: bool = True
    polish_start: float = 1e-4
    seed: int | None = None
    starts: int = 1
    threads: int = 1

    def __post_init__(self):
        for name in ("gtol", "ctol", "rtol", "armijo"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def metadata(self) -> dict:
        return {"gtol": self.gtol, "ctol": self.ctol, "rtol": self.rtol}


@dataclass(eq=False)
class SolitarySolution:
    pair: tuple
    omega1: float
    omega2: float
    gamma: float
    alpha: float
    rho1: float
    rho2: float
    m_value: float
    residual: float
    iterations: int = 0
    grad_norm: float = 0.0
    constraint_error: float = 0.0
    seed: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {
            "alpha": self.alpha,
            "rho1": self.rho1,
            "rho2": self.rho2,
            "M": self.m_value,
            "omega1": self.omega1,
            "omega2": self.omega2,
            "gamma": self.gamma,
            "residual": self.residual,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "constraint_error": self.constraint_error,
            "seed": self.seed,
        }


# -- small helpers ---------------------------------------------------------

def _dot(m: ModelParams, f, g) -> float:
    return float(np.sum(f * g) * m.grid.dv)


def _h_parts(m: ModelParams, pair):
    return tuple(_dot(m, u, m.apply_op(i, u)) for i, u in enumerate(pair))


def constraint_violation(m: ModelParams, pair, c: ConstraintSpec) -> float:
    """Largest relative violation of the three constraints."""
    q1, q2 = masses(m.grid, pair)
    hh = sum(_h_parts(m, pair))
    return max(abs(q1 - c.rho1) / c.rho1, abs(q2 - c.rho2) / c.rho2, abs(hh - c.alpha) / c.alpha)


def _check_feasible(m: ModelParams, c: ConstraintSpec, ctol: float) -> float:
    T = feasibility_threshold(m, c.rho1, c.rho2)
    if c.alpha < T * (1 - ctol):
        raise InfeasibleConstraint(
            f"alpha={c.alpha:.12g} is below the threshold lambda1*rho1+lambda2*rho2={T:.12g}"
        )
    return T


# -- retraction ------------------------------------------------------------

def _lead_solve(p, q, r, t, lam, rho, eta, tol=1e-14, max_iter=60):
    """Solve for (s, b) with w = s*u + b*phi:

        s^2 p + 2 s b q + b^2       = rho
        s^2 t + 2 s b r + b^2 lam   = eta

    where p=Q(u), q=<u,phi>, r=<u,A phi>, t=<u,A u>. Damped Newton from the
    pure mass rescaling, which is the nearest point when eta ~ t*rho/p.
    """
    def resid(z):
        s, b = z
        return np.array([
            (s * s * p + 2 * s * b * q + b * b) / rho - 1.0,
            (s * s * t + 2 * s * b * r + b * b * lam) / eta - 1.0,
        ])

    z = np.array([np.sqrt(rho / p), 0.0])
    f = resid(z)
    for _ in range(max_iter):
        nf = np.max(np.abs(f))
        if nf < tol:
            return z
        s, b = z
        J = np.array([
            [(2 * s * p + 2 * b * q) / rho, (2 * s * q + 2 * b) / rho],
            [(2 * s * t + 2 * b * r) / eta, (2 * s * r + 2 * b * lam) / eta],
        ])
        try:
            dz = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while step > 1e-10:
            znew = z + step * dz
            fnew = resid(znew)
            if np.max(np.abs(fnew)) < (1 - 1e-4 * step) * nf:
                break
            step *= 0.5
        else:
            break
        z, f = znew, fnew
    if np.max(np.abs(f)) < 1e3 * tol:
        return z
    raise RetractFailure(f"retraction Newton stagnated at residual {np.max(np.abs(f)):.2e}")


def retract(pair, m: ModelParams, c: ConstraintSpec):
    """Map a nearby pair onto the constraint manifold.

    The component with the larger relative excess above its eigen-level is
    corrected inside span{u_k, phi_k}; the other one is rescaled.
    """
    u = [np.asarray(v, dtype=float) for v in pair]
    q = masses(m.grid, u)
    if min(q) <= 0:
        raise RetractFailure("retraction needs both components nontrivial")
    T = _check_feasible(m, c, 1e-12)
    rho = (c.rho1, c.rho2)
    lams = m.lambdas
    phis = [ep.phi for ep in m.eigenpairs]
    hp = _h_parts(m, u)
    excess = [hp[i] / q[i] - lams[i] for i in range(2)]

    if abs(c.alpha - T) <= 1e-12 * T or max(excess) <= 1e-13 * max(lams):
        # at the eigen-level only pure rescaling is available
        w = [u[i] * np.sqrt(rho[i] / q[i]) for i in range(2)]
        hw = sum(_h_parts(m, w))
        if abs(hw - c.alpha) > 1e-9 * c.alpha:
            raise RetractFailure("neither component is strictly above its eigen-level")
        return tuple(w)

    last_err = None
    for k in sorted(range(2), key=lambda i: -excess[i]):
        j = 1 - k
        sj = np.sqrt(rho[j] / q[j])
        eta = c.alpha - sj * sj * hp[j]
        if eta < lams[k] * rho[k] * (1 - 1e-14) or excess[k] <= 0:
            last_err = RetractFailure(f"component {k + 1} cannot absorb the energy budget")
            continue
        Aphi = lams[k] * phis[k]
        try:
            s, b = _lead_solve(
                q[k], _dot(m, u[k], phis[k]), _dot(m, u[k], Aphi), hp[k],
                _dot(m, phis[k], m.apply_op(k, phis[k])), rho[k], eta,
            )
        except RetractFailure as exc:
            last_err = exc
            continue
        w = [None, None]
        w[k] = s * u[k] + b * phis[k]
        w[j] = sj * u[j]
        return tuple(w)
    if c.alpha >= T:
        return _blend_to_ground(u, m, c, phis)
    raise last_err


def _blend_to_ground(u, m: ModelParams, c: ConstraintSpec, phis):
    """Fallback retraction: mix both components toward their ground states.

    At masses rho the energy of (1-t) u + t phi falls continuously to the
    threshold as t -> 1, so a root in t exists whenever alpha >= T.
    """
    rho = (c.rho1, c.rho2)

    def at(t):
        w = [(1 - t) * u[i] + t * np.sqrt(rho[i]) * phis[i] for i in range(2)]
        q = masses(m.grid, w)
        return [w[i] * np.sqrt(rho[i] / q[i]) for i in range(2)]

    def gap(t):
        return sum(_h_parts(m, at(t))) - c.alpha

    if gap(0.0) <= 0:
        raise RetractFailure("pair lies below the energy budget")
    g1 = gap(1.0)
    if g1 > 1e-12 * c.alpha:
        raise RetractFailure("ground-state blend cannot reach the energy budget")
    if g1 >= 0:
        return tuple(at(1.0))
    return tuple(at(brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)))


# -- multipliers -----------------------------------------------------------

def extract_multipliers(pair, m: ModelParams):
    """Least-squares (omega1, omega2, gamma) for the Euler-Lagrange system.

    Returns ``(omega1, omega2, gamma, relative_residual)``.
    """
    u1, u2 = pair
    if min(masses(m.grid, pair)) <= 0:
        raise SingularFit("both components must be nontrivial")
    g1, g2 = grad_F(pair, m.scattering)
    Au1, Au2 = m.apply_op(0, u1), m.apply_op(1, u2)
    z = np.zeros(u1.size)
    design = np.column_stack([
        np.concatenate([u1.ravel(), z]),
        np.concatenate([z, u2.ravel()]),
        -np.concatenate([g1.ravel(), g2.ravel()]),
    ])
    target = -np.concatenate([Au1.ravel(), Au2.ravel()])
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0):
        raise SingularFit("a column of the multiplier fit vanishes identically")
    sol, _, rank, sv = np.linalg.lstsq(design / scale, target, rcond=None)
    if rank < 3 or sv[-1] < 1e-10 * sv[0]:
        raise SingularFit(f"multiplier normal equations are rank deficient (sv={sv})")
    coef = sol / scale
    res = design @ coef - target
    rel = float(np.linalg.norm(res) / np.linalg.norm(target))
    return float(coef[0]), float(coef[1]), float(coef[2]), rel


def to_physical(s: SolitarySolution):
    """Rescale a maximizer into a solitary wave with masses gamma*rho_i."""
    if not s.gamma > 0:
        raise NonpositiveGamma(f"gamma={s.gamma} must be positive")
    k = np.sqrt(s.gamma)
    U = (k * s.pair[0], k * s.pair[1])
    return U, s.omega1, s.omega2, s.gamma * s.rho1, s.gamma * s.rho2


def solitary_residual(U, omega1, omega2, m: ModelParams) -> float:
    """Relative residual of -Lap U_i + (V_i + w_i) U_i = mu_i U_i^3 + beta U_i U_j^2."""
    r = _el_residual(U, m, omega1, omega2, 1.0)
    num = np.sqrt(sum(np.sum(x ** 2) for x in r))
    den = np.sqrt(sum(np.sum(m.apply_op(i, u) ** 2) for i, u in enumerate(U)))
    return float(num / den)


def _el_residual(pair, m, omega1, omega2, gamma):
    g1, g2 = grad_F(pair, m.scattering)
    u1, u2 = pair
    return (
        m.apply_op(0, u1) + omega1 * u1 - gamma * g1,
        m.apply_op(1, u2) + omega2 * u2 - gamma * g2,
    )


# -- initial data ----------------------------------------------------------

def _orth(m, f, phi):
    return f - _dot(m, f, phi) * phi


def _smooth_random(m: ModelParams, phi, rng):
    """Random low-order polynomial times the ground state."""
    coords = [c / m.grid.L * 4.0 for c in m.grid.coords]
    f = np.zeros(m.grid.shape)
    for deg in range(1, 5):
        if m.grid.dim == 1:
            f = f + rng.standard_normal() * coords[0] ** deg
        else:
            for a in range(deg + 1):
                f = f + rng.standard_normal() * coords[0] ** a * coords[1] ** (deg - a)
    return f * phi


def initial_pair(m: ModelParams, c: ConstraintSpec, seed=None):
    """A point of the constraint manifold near the eigenpair anchor.

    Each component is a_i phi_i + b_i d_i with d_i orthogonal to phi_i, so both
    masses and the energy budget are met in closed form.
    """
    lams = m.lambdas
    phis = [ep.phi for ep in m.eigenpairs]
    T = feasibility_threshold(m, c.rho1, c.rho2)
    rho = (c.rho1, c.rho2)
    anchor = [np.sqrt(r) * p for r, p in zip(rho, phis)]
    if c.alpha - T <= 1e-12 * T:
        return tuple(anchor)
    rng = np.random.default_rng(seed) if seed is not None else None
    if rng is None:
        base = list(grad_F(anchor, m.scattering))
    else:
        base = [_smooth_random(m, p, rng) for p in phis]
    dirs = []
    for i in range(2):
        d = _orth(m, base[i], phis[i])
        if _dot(m, d, d) < 1e-20 * rho[i]:
            d = _orth(m, m.grid.r2 * phis[i], phis[i])
        dirs.append(d / np.sqrt(_dot(m, d, d)))
    for _ in range(40):
        cap = [_dot(m, d, m.apply_op(i, d)) - lams[i] for i, d in enumerate(dirs)]
        kappa = (c.alpha - T) / (rho[0] * cap[0] + rho[1] * cap[1])
        if kappa < 0.9:
            break
        # not enough room in these directions: sharpen them
        dirs = []
        for i in range(2):
            d = _orth(m, base[i] * (1 + m.grid.r2), phis[i])
            base[i] = d
            dirs.append(d / np.sqrt(_dot(m, d, d)))
    else:
        raise InfeasibleConstraint("could not construct an initial point for this budget")
    u = tuple(np.sqrt((1 - kappa) * r) * p + np.sqrt(kappa * r) * d
              for r, p, d in zip(rho, phis, dirs))
    if min(v.min() for v in u) < 0:
        u = retract(tuple(np.abs(v) for v in u), m, c)
    return u


# -- ascent ----------------------------------------------------------------

def _tangent_gradient(m: ModelParams, pair):
    """H-metric gradient of F projected on the constraint tangent space.

    Returns (P, grad_norm_sq, coef) where coef are the projection
    coefficients against the constraint gradients (2u1, 2u2, 2Au).
    """
    u1, u2 = pair
    rF = grad_F(pair, m.scattering)
    Au = (m.apply_op(0, u1), m.apply_op(1, u2))
    zero = np.zeros_like(u1)
    cons = [(2 * u1, zero), (2 * zero, 2 * u2), (2 * Au[0], 2 * Au[1])]
    G_F = (m.solve_op(0, rF[0]), m.solve_op(1, rF[1]))
    N = [(2 * m.solve_op(0, u1), zero), (zero, 2 * m.solve_op(1, u2)), (2 * u1, 2 * u2)]

    def ip(a, b):
        return _dot(m, a[0], b[0]) + _dot(m, a[1], b[1])

    gram = np.array([[ip(N[j], cons[k]) for k in range(3)] for j in range(3)])
    rhs = np.array([ip(N[j], rF) for j in range(3)])
    coef = np.linalg.solve(gram, rhs)
    P = tuple(G_F[i] - sum(coef[k] * N[k][i] for k in range(3)) for i in range(2))
    # evaluate ||P||_H^2 as a quadratic form: no cancellation, so the
    # relative norm resolves well below sqrt(machine eps)
    gn2 = ip(P, (m.apply_op(0, P[0]), m.apply_op(1, P[1])))
    ref = ip(G_F, rF)
    return P, max(gn2, 0.0), max(ref, 1e-300), coef


def _ascent(m, c, u, opts: MaximizeOptions, stop_at: float):
    """Projected gradient ascent with retraction.

    Steps are accepted by an Armijo test on F. Once the predicted gain falls
    below the rounding level of F the test is uninformative, and steps are
    accepted when they reduce the tangent-gradient norm instead.
    """
    eps = np.finfo(float).eps
    F = eval_F(m.grid, u, m.scattering)
    t = t_good = 1.0
    history = [F]
    grad = _tangent_gradient(m, u)
    gnorm = np.sqrt(grad[1] / grad[2])
    it = 0
    for it in range(1, opts.max_iter + 1):
        P, gn2, ref, _ = grad
        gnorm = np.sqrt(gn2 / ref)
        if gnorm < stop_at:
            break
        noise = opts.armijo * t_good * gn2 < 64 * eps * abs(F)
        accepted = False
        t = t_good if noise else min(t * 2.0, 1e6)
        while t > 1e-14:
            try:
                trial = retract(tuple(np.abs(u[i] + t * P[i]) for i in range(2)), m, c)
            except RetractFailure:
                t *= 0.5
                continue
            Ft = eval_F(m.grid, trial, m.scattering)
            if noise:
                gtrial = _tangent_gradient(m, trial)
                if np.sqrt(gtrial[1] / gtrial[2]) < gnorm and Ft >= F - 64 * eps * abs(F):
                    accepted = True
                    break
            elif Ft >= F + opts.armijo * t * gn2:
                accepted = True
                t_good = t
                gtrial = None
                break
            t *= 0.5
        if not accepted:
            log.debug("line search stalled at gnorm=%.3e", gnorm)
            break
        u, F = trial, Ft
        grad = gtrial if gtrial is not None else _tangent_gradient(m, u)
        history.append(F)
    else:
        P, gn2, ref, _ = grad
        gnorm = np.sqrt(gn2 / ref)
    return u, gnorm, it, history


def _newton_polish(m, c, u, gamma0, omega0, max_iter=30, tol=1e-11):
    """Newton on the bordered Euler-Lagrange + constraint system."""
    s = m.scattering
    n = m.grid.size
    dv = m.grid.dv
    u1, u2 = (v.ravel().copy() for v in u)
    om1, om2 = omega0
    gam = gamma0
    A1, A2 = m.operators
    scale_eq = None
    for _ in range(max_iter):
        g1 = s.mu1 * u1 ** 3 + s.beta * u1 * u2 ** 2
        g2 = s.mu2 * u2 ** 3 + s.beta * u2 * u1 ** 2
        Au1, Au2 = A1 @ u1, A2 @ u2
        R = np.concatenate([
            Au1 + om1 * u1 - gam * g1,
            Au2 + om2 * u2 - gam * g2,
            [u1 @ u1 * dv - c.rho1, u2 @ u2 * dv - c.rho2,
             (u1 @ Au1 + u2 @ Au2) * dv - c.alpha],
        ])
        if scale_eq is None:
            scale_eq = np.linalg.norm(np.concatenate([Au1, Au2]))
        field_err = np.linalg.norm(R[:2 * n]) / scale_eq
        cons_err = max(abs(R[-3]) / c.rho1, abs(R[-2]) / c.rho2, abs(R[-1]) / c.alpha)
        if field_err < tol and cons_err < 1e-2 * tol:
            break
        d11 = sp.diags(om1 - gam * (3 * s.mu1 * u1 ** 2 + s.beta * u2 ** 2))
        d22 = sp.diags(om2 - gam * (3 * s.mu2 * u2 ** 2 + s.beta * u1 ** 2))
        d12 = sp.diags(-gam * 2 * s.beta * u1 * u2)
        top = sp.bmat([[A1 + d11, d12], [d12, A2 + d22]])
        z = np.zeros(n)
        cols = sp.csc_matrix(np.column_stack([
            np.concatenate([u1, z]),
            np.concatenate([z, u2]),
            -np.concatenate([g1, g2]),
        ]))
        rows = sp.csr_matrix(np.vstack([
            2 * dv * np.concatenate([u1, z]),
            2 * dv * np.concatenate([z, u2]),
            2 * dv * np.concatenate([Au1, Au2]),
        ]))
        J = sp.bmat([[top, cols], [rows, None]], format="csc")
        dz = spsolve(J, -R)
        if not np.all(np.isfinite(dz)):
            raise NoConvergence("Newton polish produced non-finite update")
        u1 = u1 + dz[:n]
        u2 = u2 + dz[n:2 * n]
        om1, om2, gam = om1 + dz[-3], om2 + dz[-2], gam + dz[-1]
    else:
        raise NoConvergence(f"Newton polish did not converge (field {field_err:.2e}, "
                            f"constraints {cons_err:.2e})")
    shape = m.grid.shape
    return (u1.reshape(shape), u2.reshape(shape)), (om1, om2, gam)


def _threshold_solution(m, c, opts):
    phis = [ep.phi for ep in m.eigenpairs]
    pair = (np.sqrt(c.rho1) * phis[0], np.sqrt(c.rho2) * phis[1])
    lam1, lam2 = m.lambdas
    res = float(np.sqrt(sum(
        np.sum((m.apply_op(i, u) - lam * u) ** 2)
        for i, (u, lam) in enumerate(zip(pair, (lam1, lam2)))
    ) / sum(np.sum(m.apply_op(i, u) ** 2) for i, u in enumerate(pair))))
    return SolitarySolution(
        pair=pair, omega1=-lam1, omega2=-lam2, gamma=0.0,
        alpha=c.alpha, rho1=c.rho1, rho2=c.rho2,
        m_value=eval_F(m.grid, pair, m.scattering), residual=res,
        constraint_error=constraint_violation(m, pair, c),
        diagnostics={"threshold": True, "tolerances": opts.metadata()},
    )


def maximize(m: ModelParams, c: ConstraintSpec, init=None,
             opts: MaximizeOptions | None = None) -> SolitarySolution:
    """Compute M(alpha, rho1, rho2) and its maximizer.

    With ``opts.starts > 1`` this delegates to :func:`multi_start`.
    """
    opts = opts or MaximizeOptions()
    if opts.starts > 1 and init is None:
        return multi_start(m, c, opts)[0]
    require_nondeg(m.scattering)
    T = _check_feasible(m, c, opts.ctol)
    if abs(c.alpha - T) <= opts.ctol * T:
        return _threshold_solution(m, c, opts)

    if init is None:
        u = initial_pair(m, c, opts.seed)
    else:
        m.grid.check(*init)
        try:
            u = retract(tuple(np.abs(np.asarray(v, dtype=float)) for v in init), m, c)
        except RetractFailure:
            # measure-zero configuration: nudge towards a generic direction and retry
            rng = np.random.default_rng(0 if opts.seed is None else opts.seed)
            phis = [ep.phi for ep in m.eigenpairs]
            u = retract(tuple(np.abs(v) + 1e-3 * np.sqrt(r) * _smooth_random(m, p, rng)
                              for v, r, p in zip(init, (c.rho1, c.rho2), phis)), m, c)

    stop_at = opts.polish_start if opts.polish else opts.gtol
    u, gnorm, iters, history = _ascent(m, c, u, opts, stop_at)
    F_ascent = history[-1]
    polished = False
    if opts.polish:
        _, _, _, coef = _tangent_gradient(m, u)
        gamma0 = 1.0 / (2.0 * coef[2])
        omega0 = (coef[0] / coef[2], coef[1] / coef[2])
        try:
            pu, _ = _newton_polish(m, c, u, gamma0, omega0)
            pu = tuple(np.abs(v) for v in pu)
            Fp = eval_F(m.grid, pu, m.scattering)
            scale = abs(F_ascent) + 1e-300
            if Fp >= F_ascent - 1e-8 * scale:
                u, polished = pu, True
            else:
                log.warning("Newton polish moved to a lower critical point; kept ascent iterate")
        except (NoConvergence, RuntimeError) as exc:
            log.warning("Newton polish failed: %s", exc)
        if not polished:
            u, gnorm, more, hist2 = _ascent(m, c, u, opts, opts.gtol)
            iters += more
            history.extend(hist2[1:])
    P, gn2, ref, coef = _tangent_gradient(m, u)
    gnorm = float(np.sqrt(gn2 / ref))
    om1, om2, gam, res = extract_multipliers(u, m)
    cerr = constraint_violation(m, u, c)
    sol = SolitarySolution(
        pair=u, omega1=om1, omega2=om2, gamma=gam,
        alpha=c.alpha, rho1=c.rho1, rho2=c.rho2,
        m_value=eval_F(m.grid, u, m.scattering), residual=res,
        iterations=iters, grad_norm=gnorm, constraint_error=cerr, seed=opts.seed,
        diagnostics={"polished": polished, "tolerances": opts.metadata(),
                     "F_history_monotone": bool(np.all(np.diff(history) >= -1e-12 * (abs(history[-1]) + 1)))},
    )
    if res > opts.rtol or cerr > opts.ctol or (gnorm > opts.gtol and not polished):
        raise NoConvergence(
            f"maximize(alpha={c.alpha:.6g}) ended with residual {res:.2e}, "
            f"constraint error {cerr:.2e}, gradient {gnorm:.2e}",
            residual=res, iterations=iters,
        )
    return sol


def l2_distance(m: ModelParams, a, b) -> float:
    return float(np.sqrt(sum(integrate(m.grid, (x - y) ** 2) for x, y in zip(a, b))))


def _run_seed(args):
    m, c, opts, seed = args
    return maximize(m, c, None, replace(opts, seed=seed, starts=1))


def multi_start(m: ModelParams, c: ConstraintSpec, opts: MaximizeOptions | None = None,
                seeds=None):
    """Run independent starts and reduce deterministically.

    Returns ``(best, solutions)``; best has the largest F, ties broken by seed
    order. Distinct solutions (L2 distance > 1e-3) are listed in
    ``best.diagnostics["distinct"]``.
    """
    opts = opts or MaximizeOptions()
    if seeds is None:
        base = 0 if opts.seed is None else opts.seed
        seeds = [base + k for k in range(max(opts.starts, 1))]
    work = [(m, c, opts, s) for s in seeds]
    if opts.threads > 1:
        with ThreadPoolExecutor(opts.threads) as pool:
            sols = list(pool.map(_run_seed, work))
    else:
        sols = [_run_seed(w) for w in work]
    order = sorted(range(len(sols)), key=lambda k: (-sols[k].m_value, k))
    best = sols[order[0]]
    distinct = []
    for k in order:
        if all(l2_distance(m, sols[k].pair, sols[d].pair) > 1e-3 for d in distinct):
            distinct.append(k)
    best.diagnostics["distinct"] = [
        {"seed": sols[k].seed, "M": sols[k].m_value} for k in distinct
    ]
    best.diagnostics["max_spread"] = max(l2_distance(m, best.pair, s.pair) for s in sols)
    return best, sols
