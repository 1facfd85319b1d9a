"""Exception hierarchy.

Numerical-input errors also derive from ValueError so callers can catch the
builtin type.
"""


class QGLError(Exception):
    """Base class for all lab errors."""


# numkit
class NonHermitianInput(QGLError, ValueError):
    """Symmetry residual exceeds tolerance."""


class MatrixOverflow(QGLError, ArithmeticError):
    """Matrix exponential left the representable range."""


class SingularNegativePower(QGLError, ValueError):
    """Negative power of a numerically singular matrix."""


class NotPositiveSemidefinite(QGLError, ValueError):
    """Matrix has a clearly negative eigenvalue."""


class DimensionMismatch(QGLError, ValueError):
    """Operands have incompatible shapes."""


# model
class TooLarge(QGLError, ValueError):
    """Qubit count exceeds the dense-simulation limit."""


class RangeTooSmall(QGLError, ValueError):
    """Grid range cannot hold every Bohr frequency."""


class InvalidGrid(QGLError, ValueError):
    """Grid size is not a power of two or parameters are non-positive."""


# oft
class UnsupportedFilter(QGLError, ValueError):
    """Filter has no closed-form Fourier transform."""


class UnroundedHamiltonian(QGLError, ValueError):
    """Bohr frequencies are not multiples of omega0."""


# generator
class IncompatibleSpec(QGLError, ValueError):
    """Lindblad spec components disagree on dimensions or grids."""


class QuadratureFailure(QGLError, ArithmeticError):
    """Adaptive integration could not reach tolerance."""


class RatioViolation(QGLError, ValueError):
    """Two-sided weights break the target-ratio constraint."""


# discriminant
class SingularState(QGLError, ValueError):
    """Reference state is not full rank."""


class SymmetryViolation(QGLError, ValueError):
    """Jump set is not adjoint-closed or filter is complex."""


class PreconditionBetaMu(QGLError, ValueError):
    """beta * mu exceeds one."""


# dynamics
class DegenerateKernel(QGLError, ArithmeticError):
    """Near-zero eigenspace has dimension above one."""


class NotMixed(QGLError, ArithmeticError):
    """Contraction ratio still above one half at t_max."""


class PreconditionFailed(QGLError, ValueError):
    """A bound's hypotheses do not hold on the instance."""


# circuits
class EigvecDistTooLarge(QGLError, ValueError):
    """Annealing node eigenvector too far from the purified Gibbs state."""


class NonUnitaryCompletion(QGLError, ValueError):
    """Orthonormal completion degenerated."""


class NonUnitaryJumps(QGLError, ValueError):
    """Scaled jumps are not unitary."""


# cli
class ConfigError(QGLError):
    """Experiment document is malformed."""


class InstanceError(QGLError):
    """Instance described by a valid document cannot be built."""


class CheckFailed(QGLError):
    """At least one report row failed its check."""

    def __init__(self, message: str, failing_rows: list[dict] | None = None):
        super().__init__(message)
        self.failing_rows = failing_rows or []
