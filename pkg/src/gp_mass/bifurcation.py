"""Diagnostics along the trivial eigenfunction branch xbar(theta).

At budget 1 and masses (cos^2 t / lambda_1, sin^2 t / lambda_2) the only
admissible pair is the scaled eigenpair ubar(theta). Maximizers for budget
(1 + eps) bifurcate from it with gamma ~ a(theta) sqrt(eps).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import RhsNotOrthogonal, ThetaDegenerate
from .maximizer import MaximizeOptions, l2_distance, maximize
from .model import ConstraintSpec, ModelParams, require_nondeg


@dataclass(eq=False)
class ThetaPoint:
    theta: float
    rho_bar1: float
    rho_bar2: float
    u_bar: tuple

    @property
    def threshold(self) -> float:
        return 1.0


def theta_point(m: ModelParams, theta: float) -> ThetaPoint:
    if not 0.0 < theta < 0.5 * np.pi:
        raise ThetaDegenerate(f"theta={theta} must lie strictly inside (0, pi/2)")
    lam1, lam2 = m.lambdas
    phi1, phi2 = (ep.phi for ep in m.eigenpairs)
    c, s = np.cos(theta), np.sin(theta)
    return ThetaPoint(
        theta, c * c / lam1, s * s / lam2,
        (c / np.sqrt(lam1) * phi1, s / np.sqrt(lam2) * phi2),
    )


@dataclass(eq=False)
class KernelElement:
    psi1: np.ndarray
    psi2: np.ndarray
    o1: float
    o2: float
    nondeg_value: float
    point: ThetaPoint

    @property
    def a_theta(self) -> float:
        """Predicted limit of gamma / sqrt(eps) on the positive branch."""
        return float(np.sqrt(2.0 / self.nondeg_value))


def _dot(m, f, g):
    return float(np.sum(f * g) * m.grid.dv)


def _solve_on_complement(m: ModelParams, i: int, rhs: np.ndarray) -> np.ndarray:
    """(A_i - lambda_i) psi = rhs with <psi, phi_i> = 0, via the bordered system."""
    lam = m.lambdas[i]
    phi = m.eigenpairs[i].phi.ravel()
    n = phi.size
    A = m.operators[i] - lam * sp.identity(n, format="csc")
    col = sp.csc_matrix(phi[:, None])
    K = sp.bmat([[A, col], [col.T, None]], format="csc")
    sol = spsolve(K, np.concatenate([rhs.ravel(), [0.0]]))
    return sol[:n].reshape(m.grid.shape)


def kernel_element(m: ModelParams, theta: float, orth_tol: float = 1e-8) -> KernelElement:
    require_nondeg(m.scattering)
    tp = theta_point(m, theta)
    s = m.scattering
    ub1, ub2 = tp.u_bar
    rho = (tp.rho_bar1, tp.rho_bar2)
    zeta = (s.mu1 * ub1 ** 3 + s.beta * ub1 * ub2 ** 2,
            s.mu2 * ub2 ** 3 + s.beta * ub2 * ub1 ** 2)
    o = tuple(_dot(m, zeta[i], tp.u_bar[i]) / rho[i] for i in range(2))
    psis = []
    for i in range(2):
        rhs = zeta[i] - o[i] * tp.u_bar[i]
        phi = m.eigenpairs[i].phi
        scale = np.sqrt(_dot(m, rhs, rhs)) + np.sqrt(_dot(m, zeta[i], zeta[i]))
        if abs(_dot(m, rhs, phi)) > orth_tol * scale:
            raise RhsNotOrthogonal(f"<rhs_{i + 1}, phi_{i + 1}> = {_dot(m, rhs, phi):.3e}")
        psi = _solve_on_complement(m, i, rhs)
        ub = tp.u_bar[i]
        psi = psi - _dot(m, psi, ub) / _dot(m, ub, ub) * ub
        psis.append(psi)
    lams = m.lambdas
    nondeg = 2.0 * sum(
        _dot(m, psis[i], m.apply_op(i, psis[i])) - lams[i] * _dot(m, psis[i], psis[i])
        for i in range(2)
    )
    return KernelElement(psis[0], psis[1], o[0], o[1], nondeg, tp)


def apply_linearization(m: ModelParams, x, h):
    """Derivative of the bifurcation map at x = (u1, u2, w1, w2, g) applied to
    h = (v1, v2, o1, o2, k).

    Returns (field1, field2, mass1, mass2, energy) rows; field rows are the L2
    representatives of the dual-space components.
    """
    u1, u2, w1, w2, g = x
    v1, v2, o1, o2, k = h
    s = m.scattering
    u = (u1, u2)
    v = (v1, v2)
    w = (w1, w2)
    o = (o1, o2)
    mu = (s.mu1, s.mu2)
    rows = []
    for i in range(2):
        j = 1 - i
        zeta = mu[i] * u[i] ** 3 + s.beta * u[i] * u[j] ** 2
        rows.append(
            -m.apply_op(i, v[i]) - w[i] * v[i] - o[i] * u[i] + k * zeta
            + g * (3 * mu[i] * u[i] ** 2 * v[i] + s.beta * u[j] ** 2 * v[i]
                   + 2 * s.beta * u1 * u2 * v[j])
        )
    rows.append(2 * _dot(m, u1, v1))
    rows.append(2 * _dot(m, u2, v2))
    rows.append(2 * (_dot(m, u1, m.apply_op(0, v1)) + _dot(m, u2, m.apply_op(1, v2))))
    return tuple(rows)


def xbar(m: ModelParams, tp: ThetaPoint):
    lam1, lam2 = m.lambdas
    return (tp.u_bar[0], tp.u_bar[1], -lam1, -lam2, 0.0)


def kernel_residual(m: ModelParams, K: KernelElement) -> dict:
    """Membership check of (psi1, psi2, o1, o2, 1) in the kernel of the linearization."""
    rows = apply_linearization(m, xbar(m, K.point), (K.psi1, K.psi2, K.o1, K.o2, 1.0))
    s = m.scattering
    ub1, ub2 = K.point.u_bar
    ref = np.sqrt(sum(_dot(m, z, z) for z in (
        s.mu1 * ub1 ** 3 + s.beta * ub1 * ub2 ** 2,
        s.mu2 * ub2 ** 3 + s.beta * ub2 * ub1 ** 2,
    )))
    field = np.sqrt(_dot(m, rows[0], rows[0]) + _dot(m, rows[1], rows[1]))
    return {
        "field_residual": float(field / ref),
        "mass_rows": (rows[2], rows[3]),
        "energy_row": rows[4],
        "orthogonality": (_dot(m, K.psi1, ub1), _dot(m, K.psi2, ub2)),
    }


def range_defect(m: ModelParams, tp: ThetaPoint, h) -> float:
    """|k - (lambda1 h1 + lambda2 h2)| for the image of h under the linearization."""
    rows = apply_linearization(m, xbar(m, tp), h)
    lam1, lam2 = m.lambdas
    return abs(rows[4] - (lam1 * rows[2] + lam2 * rows[3]))


@dataclass
class ScalingResult:
    theta: float
    eps: np.ndarray
    alphas: np.ndarray
    gammas: np.ndarray
    distances: np.ndarray
    slope: float
    intercept: float
    ratio: float
    predicted_ratio: float

    def rows(self):
        for e, a, g, d in zip(self.eps, self.alphas, self.gammas, self.distances):
            yield {"eps": e, "alpha": a, "gamma": g,
                   "ratio_gamma_sqrt_eps": g / np.sqrt(e), "l2_dist_to_anchor": d}


def small_mass_scaling(m: ModelParams, theta: float, eps_grid,
                       opts: MaximizeOptions | None = None) -> ScalingResult:
    """Solve at alpha = T (1 + eps) for each eps and fit log gamma against log eps.

    T is the threshold at the theta masses (equal to 1 by construction). The
    ratio gamma/sqrt(eps) at the smallest eps is an empirical estimate of
    a(theta); ``predicted_ratio`` is sqrt(2 / nondeg_value).
    """
    opts = replace(opts or MaximizeOptions(), starts=1)
    tp = theta_point(m, theta)
    eps = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    if eps.size < 2 or eps.min() <= 0:
        raise ValueError("eps_grid needs at least two positive values")
    lam1, lam2 = m.lambdas
    T = lam1 * tp.rho_bar1 + lam2 * tp.rho_bar2
    init = None
    alphas, gammas, dists = [], [], []
    for e in eps:
        a = T * (1.0 + e)
        sol = maximize(m, ConstraintSpec(a, tp.rho_bar1, tp.rho_bar2), init, opts)
        init = sol.pair
        alphas.append(a)
        gammas.append(sol.gamma)
        dists.append(l2_distance(m, sol.pair, tp.u_bar))
    gammas = np.array(gammas)
    slope, intercept = np.polyfit(np.log(eps), np.log(gammas), 1)
    K = kernel_element(m, theta)
    return ScalingResult(
        theta, eps, np.array(alphas), gammas, np.array(dists),
        float(slope), float(intercept),
        float(gammas[-1] / np.sqrt(eps[-1])), K.a_theta,
    )


def theta_window(lam1: float, lam2: float, k: float):
    if k < 1:
        raise ValueError("k must be >= 1")
    return (float(np.arctan(np.sqrt(lam2 / (k * lam1)))),
            float(np.arctan(np.sqrt(k * lam2 / lam1))))


def mass_window(m: ModelParams, k: float, eps: float, n_theta: int = 7,
                opts: MaximizeOptions | None = None):
    """Theta window for mass ratios in [1/k, k] and the mass level m_bar.

    m_bar = min over sampled theta of (rho_bar1 + rho_bar2) sqrt(gamma(eps, theta)).
    Returns ``(m_bar, (theta_minus, theta_plus), samples)``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    lam1, lam2 = m.lambdas
    lo, hi = theta_window(lam1, lam2, k)
    thetas = np.linspace(lo, hi, n_theta) if hi > lo else np.array([lo])
    samples = []
    for th in thetas:
        tp = theta_point(m, th)
        T = lam1 * tp.rho_bar1 + lam2 * tp.rho_bar2
        sol = maximize(m, ConstraintSpec(T * (1 + eps), tp.rho_bar1, tp.rho_bar2), None, opts)
        level = (tp.rho_bar1 + tp.rho_bar2) * np.sqrt(max(sol.gamma, 0.0))
        samples.append({"theta": float(th), "gamma": sol.gamma, "level": float(level)})
    m_bar = min(s["level"] for s in samples)
    return m_bar, (lo, hi), samples
