"""Physical parameters, regime classification and the functionals F, E, Q."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConfigError, DegenerateRegime
from .grid import Grid, h_norm_sq, integrate, read_field

POTENTIAL_KINDS = ("harmonic", "anisotropic-harmonic", "quartic", "custom-file")


@dataclass(frozen=True)
class PotentialSpec:
    """A trapping potential from the built-in catalog.

    ``coeffs`` per kind:

    * harmonic: ``{"scale": a}`` gives ``a |x|^2`` (default a = 1)
    * anisotropic-harmonic: ``{"a": [a_1, ..., a_dim]}`` gives ``sum a_i x_i^2``
    * quartic: ``{"scale": a}`` gives ``a |x|^4``
    * custom-file: ``{"path": "V.txt"}``, a gpfield v1 dump on the same grid
    """

    kind: str = "harmonic"
    coeffs: dict = field(default_factory=dict)

    def evaluate(self, grid: Grid) -> np.ndarray:
        if self.kind == "harmonic":
            return float(self.coeffs.get("scale", 1.0)) * grid.r2
        if self.kind == "anisotropic-harmonic":
            a = [float(v) for v in self.coeffs.get("a", [1.0] * grid.dim)]
            if len(a) != grid.dim:
                raise ConfigError(f"anisotropic-harmonic needs {grid.dim} coefficients")
            return sum(ai * c ** 2 for ai, c in zip(a, grid.coords))
        if self.kind == "quartic":
            return float(self.coeffs.get("scale", 1.0)) * grid.r2 ** 2
        if self.kind == "custom-file":
            fgrid, values = read_field(self.coeffs["path"])
            if fgrid != grid:
                raise ConfigError("custom potential was tabulated on a different grid")
            return np.asarray(values, dtype=float)
        raise ConfigError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")


def boundary_min(grid: Grid, V: np.ndarray) -> float:
    """Smallest potential value on the outermost ring of interior nodes."""
    if grid.dim == 1:
        return float(min(V[0], V[-1]))
    return float(min(V[0, :].min(), V[-1, :].min(), V[:, 0].min(), V[:, -1].min()))


@dataclass(frozen=True)
class ScatteringParams:
    mu1: float
    mu2: float
    beta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.mu1, self.mu2, self.beta)):
            raise ConfigError("scattering parameters must be finite")


@dataclass(frozen=True)
class Regime:
    nondeg: bool
    label: str
    reason: str = ""


def _same(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-14)


def classify(s: ScatteringParams) -> Regime:
    mu1, mu2, beta = s.mu1, s.mu2, s.beta
    if mu1 * mu2 < 0:
        return Regime(True, "mixed-sign")
    if mu1 == 0 and mu2 == 0:
        return Regime(False, "degenerate", "mu1 = mu2 = 0")
    if mu1 >= 0 and mu2 >= 0:
        if _same(beta, -math.sqrt(mu1 * mu2)):
            return Regime(False, "degenerate", "mu1, mu2 >= 0 with beta = -sqrt(mu1*mu2)")
        return Regime(True, "focusing-coop-or-comp")
    # both <= 0, not both zero
    if _same(beta, math.sqrt(mu1 * mu2)):
        return Regime(False, "degenerate", "mu1, mu2 <= 0 with beta = sqrt(mu1*mu2)")
    if mu1 < 0 and mu2 < 0 and beta ** 2 < mu1 * mu2:
        return Regime(True, "defocusing-weak-interaction")
    return Regime(True, "defocusing")


def require_nondeg(s: ScatteringParams) -> Regime:
    regime = classify(s)
    if not regime.nondeg:
        raise DegenerateRegime(f"degenerate scattering {s}: {regime.reason}")
    return regime


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Grid, evaluated potentials and scattering lengths.

    Operator matrices, factorizations and principal eigenpairs are computed
    lazily and cached on the instance.
    """

    grid: Grid
    V1: np.ndarray
    V2: np.ndarray
    scattering: ScatteringParams
    eig_tol: float = 1e-10

    def __post_init__(self):
        self.grid.check(self.V1, self.V2)
        for V in (self.V1, self.V2):
            if not np.all(np.isfinite(V)) or V.min() < 0:
                raise ConfigError("potentials must be finite and nonnegative")

    @classmethod
    def build(cls, grid, pot1: PotentialSpec, pot2: PotentialSpec, scattering,
              confinement_floor: float = 0.0, **kw) -> "ModelParams":
        V1, V2 = pot1.evaluate(grid), pot2.evaluate(grid)
        for i, V in ((1, V1), (2, V2)):
            if boundary_min(grid, V) < confinement_floor:
                raise ConfigError(
                    f"V{i} at the box boundary is {boundary_min(grid, V):.3g}, "
                    f"below the confinement floor {confinement_floor}"
                )
        return cls(grid, V1, V2, scattering, **kw)

    @classmethod
    def harmonic(cls, dim=1, L=10.0, n=1024, mu1=-1.0, mu2=-1.0, beta=0.0,
                 scale1=1.0, scale2=1.0, **kw) -> "ModelParams":
        grid = Grid(dim, L, n)
        return cls.build(
            grid,
            PotentialSpec("harmonic", {"scale": scale1}),
            PotentialSpec("harmonic", {"scale": scale2}),
            ScatteringParams(mu1, mu2, beta),
            **kw,
        )

    def with_scattering(self, s: ScatteringParams) -> "ModelParams":
        new = ModelParams(self.grid, self.V1, self.V2, s, self.eig_tol)
        # potentials are shared, so operators and eigenpairs carry over
        for name in ("operators", "factors", "eigenpairs"):
            if name in self.__dict__:
                new.__dict__[name] = self.__dict__[name]
        return new

    @property
    def potentials(self):
        return (self.V1, self.V2)

    @cached_property
    def operators(self):
        """Sparse matrices of -Lap + V_i on raveled fields."""
        lap = self.grid.laplacian_matrix
        return tuple((-lap + sp.diags(V.ravel())).tocsc() for V in self.potentials)

    @cached_property
    def factors(self):
        return tuple(splu(A) for A in self.operators)

    @cached_property
    def eigenpairs(self):
        from .eigen import principal_eigenpair

        return tuple(principal_eigenpair(self.grid, V, self.eig_tol) for V in self.potentials)

    @property
    def lambdas(self):
        return tuple(ep.lam for ep in self.eigenpairs)

    def apply_op(self, i: int, f: np.ndarray) -> np.ndarray:
        """(-Lap + V_i) f, with i in {0, 1}."""
        return (self.operators[i] @ f.ravel()).reshape(self.grid.shape)

    def solve_op(self, i: int, f: np.ndarray) -> np.ndarray:
        return self.factors[i].solve(np.ascontiguousarray(f.ravel())).reshape(self.grid.shape)


def masses(grid: Grid, pair):
    return tuple(float(integrate(grid, np.abs(f) ** 2)) for f in pair)


def eval_F(grid: Grid, pair, s: ScatteringParams) -> float:
    """Quartic interaction functional; depends only on the moduli."""
    f1, f2 = pair
    grid.check(f1, f2)
    a = np.abs(f1) ** 2
    b = np.abs(f2) ** 2
    return 0.25 * float(integrate(grid, s.mu1 * a * a + 2.0 * s.beta * a * b + s.mu2 * b * b))


def grad_F(pair, s: ScatteringParams):
    """L2 gradient of F at a real pair."""
    u1, u2 = pair
    return (
        s.mu1 * u1 ** 3 + s.beta * u1 * u2 ** 2,
        s.mu2 * u2 ** 3 + s.beta * u2 * u1 ** 2,
    )


def eval_energy(pair, m: ModelParams, gamma: float) -> float:
    return 0.5 * h_norm_sq(m.grid, pair, m.V1, m.V2) - gamma * eval_F(m.grid, pair, m.scattering)


def eval_action(pair, m: ModelParams, omega1: float, omega2: float, gamma: float) -> float:
    q1, q2 = masses(m.grid, pair)
    return eval_energy(pair, m, gamma) + 0.5 * omega1 * q1 + 0.5 * omega2 * q2


def action_gradient(pair, m: ModelParams, omega1, omega2, gamma):
    """L2 gradient of the action: the Euler-Lagrange operator applied to the pair."""
    g1, g2 = grad_F(pair, m.scattering)
    u1, u2 = pair
    return (
        m.apply_op(0, u1) + omega1 * u1 - gamma * g1,
        m.apply_op(1, u2) + omega2 * u2 - gamma * g2,
    )


@dataclass(frozen=True)
class ConstraintSpec:
    """Energy-norm budget alpha and target masses rho1, rho2."""

    alpha: float
    rho1: float
    rho2: float

    def __post_init__(self):
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ConfigError(f"target masses must be positive, got ({self.rho1}, {self.rho2})")
        if not np.isfinite(self.alpha):
            raise ConfigError("alpha must be finite")
