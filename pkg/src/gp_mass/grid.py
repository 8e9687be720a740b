"""Finite-difference grid on the box [-L, L]^dim with homogeneous Dirichlet data.

Fields are plain numpy arrays of shape ``grid.shape`` holding the interior
nodes only; the boundary value is implicitly zero. A *pair* is a tuple
``(f1, f2)`` of two such arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, MismatchedGrid


@dataclass(frozen=True)
class Grid:
    dim: int
    L: float
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8:
            raise ConfigError(f"n must be >= 8, got {self.n}")
        if not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n + 1)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n ** self.dim

    @property
    def dv(self) -> float:
        """Quadrature weight of one node."""
        return self.h ** self.dim

    @cached_property
    def x(self) -> np.ndarray:
        """Interior node coordinates along one axis."""
        return -self.L + self.h * np.arange(1, self.n + 1)

    @cached_property
    def coords(self) -> tuple:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        if self.dim == 1:
            return (self.x,)
        return tuple(np.meshgrid(self.x, self.x, indexing="ij"))

    @cached_property
    def r2(self) -> np.ndarray:
        return sum(c ** 2 for c in self.coords)

    @cached_property
    def laplacian_matrix(self) -> sp.csc_matrix:
        """Sparse 3-point / 5-point Laplacian acting on raveled fields."""
        n, h = self.n, self.h
        d1 = sp.diags(
            [np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]
        ) / h ** 2
        if self.dim == 1:
            return d1.tocsc()
        eye = sp.identity(n)
        return (sp.kron(d1, eye) + sp.kron(eye, d1)).tocsc()

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)

    def check(self, *fields) -> None:
        for f in fields:
            if np.shape(f) != self.shape:
                raise MismatchedGrid(
                    f"field of shape {np.shape(f)} does not match grid {self.shape}"
                )


def laplacian_apply(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Second-order centered Laplacian with zero ghost values."""
    grid.check(f)
    padded = np.pad(f, 1)
    inner = (slice(1, -1),) * grid.dim
    out = -2.0 * grid.dim * f
    for axis in range(grid.dim):
        lo = list(inner)
        hi = list(inner)
        lo[axis] = slice(0, -2)
        hi[axis] = slice(2, None)
        out = out + padded[tuple(lo)] + padded[tuple(hi)]
    return out / grid.h ** 2


def integrate(grid: Grid, f: np.ndarray):
    grid.check(f)
    return np.sum(f) * grid.dv


def l2_inner(grid: Grid, f: np.ndarray, g: np.ndarray):
    """Integral of f * g; g is expected real so no conjugation is applied."""
    grid.check(f, g)
    return np.sum(f * g) * grid.dv


def modulus_field(f: np.ndarray) -> np.ndarray:
    return np.abs(f)


def component_h_norm_sq(grid: Grid, f: np.ndarray, V: np.ndarray) -> float:
    """<(-Lap + V) f, f> for a single (real or complex) component."""
    grid.check(f, V)
    Af = -laplacian_apply(grid, f) + V * f
    return float(np.real(np.sum(np.conj(f) * Af)) * grid.dv)


def h_norm_sq(grid: Grid, pair, V1: np.ndarray, V2: np.ndarray) -> float:
    """Squared energy norm of a pair.

    The gradient term is the quadratic form of the discrete Laplacian, so it
    is exactly consistent with :func:`laplacian_apply`.
    """
    f1, f2 = pair
    return component_h_norm_sq(grid, f1, V1) + component_h_norm_sq(grid, f2, V2)


# -- gpfield v1 text dumps -------------------------------------------------

def write_field(path, grid: Grid, f: np.ndarray) -> None:
    grid.check(f)
    kind = "complex" if np.iscomplexobj(f) else "real"
    flat = np.ravel(f)
    data = flat[:, None] if kind == "real" else np.column_stack([flat.real, flat.imag])
    with open(path, "w") as fh:
        fh.write(f"gpfield v1 {grid.dim} {grid.n} {float(grid.L)!r} {kind}\n")
        # 17 significant digits round-trip binary64 exactly
        np.savetxt(fh, data, fmt="%.17g")


def read_field(path):
    """Read a ``gpfield v1`` dump; returns ``(grid, values)``."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[:2] != ["gpfield", "v1"]:
            raise ConfigError(f"{path}: not a gpfield v1 dump")
        dim, n, L, kind = int(header[2]), int(header[3]), float(header[4]), header[5]
        grid = Grid(dim, L, n)
        data = np.loadtxt(fh, ndmin=2)
    if kind == "real":
        values = data[:, 0]
    elif kind == "complex":
        values = data[:, 0] + 1j * data[:, 1]
    else:
        raise ConfigError(f"{path}: unknown field kind {kind!r}")
    if values.size != grid.size:
        raise ConfigError(f"{path}: expected {grid.size} values, found {values.size}")
    return grid, values.reshape(grid.shape)
