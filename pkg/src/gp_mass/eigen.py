"""Principal eigenpair of the discrete Schroedinger operator -Lap + V."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, NoConvergence
from .grid import Grid, integrate


@dataclass(frozen=True, eq=False)
class Eigenpair:
    lam: float
    phi: np.ndarray
    residual: float
    iterations: int


def principal_eigenpair(grid: Grid, V: np.ndarray, tol: float = 1e-10,
                        max_iter: int = 1000) -> Eigenpair:
    """Inverse power iteration (shift 0) with a sparse LU of the operator.

    Returns phi normalized to unit L2 mass and nonnegative.
    """
    grid.check(V)
    if V.min() < 0:
        raise ConfigError("potential must be nonnegative")
    A = (-grid.laplacian_matrix + sp.diags(V.ravel())).tocsc()
    lu = splu(A)
    dv = grid.dv
    v = np.ones(grid.size)
    v /= np.sqrt(v @ v * dv)
    lam, res = np.nan, np.inf
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        v = w / np.sqrt(w @ w * dv)
        Av = A @ v
        lam = float(v @ Av * dv)
        res = float(np.sqrt(np.sum((Av - lam * v) ** 2) * dv))
        if res <= tol:
            break
    else:
        raise NoConvergence(
            f"inverse iteration stopped at residual {res:.3e} > {tol:.1e}",
            residual=res, iterations=max_iter,
        )
    # sign: largest-magnitude node positive
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    phi = v.reshape(grid.shape)
    if phi.min() < -1e-12 * np.abs(phi).max():
        raise NoConvergence("computed ground state changes sign", residual=res, iterations=it)
    phi = np.maximum(phi, 0.0)
    return Eigenpair(lam, phi, res, it)


def rayleigh_quotient(grid: Grid, f: np.ndarray, V: np.ndarray) -> float:
    from .grid import component_h_norm_sq

    return component_h_norm_sq(grid, f, V) / float(integrate(grid, f * f))


def feasibility_threshold(m, rho1: float, rho2: float) -> float:
    """lambda_1 rho1 + lambda_2 rho2, below which the constraint set is empty."""
    if not (rho1 > 0 and rho2 > 0):
        raise ConfigError(f"target masses must be positive, got ({rho1}, {rho2})")
    lam1, lam2 = m.lambdas
    return lam1 * rho1 + lam2 * rho2
