"""Exception hierarchy shared by all solver modules."""


class GPMassError(Exception):
    """Base class for every error raised by gp_mass."""


class ConfigError(GPMassError, ValueError):
    """Invalid user configuration or precondition violation."""


class MismatchedGrid(GPMassError, ValueError):
    """Fields passed together do not live on the same grid."""


class NoConvergence(GPMassError, RuntimeError):
    """An iterative solver exhausted its budget above tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InfeasibleConstraint(GPMassError, ValueError):
    """The constraint set U(alpha, rho1, rho2) is empty."""


class DegenerateRegime(GPMassError, ValueError):
    """Scattering parameters violate every non-degeneracy clause."""


class RetractFailure(GPMassError, RuntimeError):
    """The scalar Newton solve of the retraction stagnated."""


class SingularFit(GPMassError, RuntimeError):
    """The multiplier least-squares problem is rank deficient."""


class NonpositiveGamma(GPMassError, ValueError):
    """A physical rescaling was requested with gamma <= 0."""


class OutOfRange(GPMassError, ValueError):
    """A query point lies outside the computed branch."""


class ThetaDegenerate(GPMassError, ValueError):
    """theta is not strictly inside (0, pi/2)."""


class RhsNotOrthogonal(GPMassError, RuntimeError):
    """Fredholm solvability failed for the kernel-element solve."""


class LinearSolveFailure(GPMassError, RuntimeError):
    """A linear solve inside the time integrator produced non-finite values."""
