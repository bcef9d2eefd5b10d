"""Exception types shared across the package."""


class MtphaseError(Exception):
    """Base class for package-specific failures."""


class CycleOverflow(MtphaseError):
    """A renewal cycle exceeded the configured jump cap.

    Cycles terminate almost surely at any positive rates, so hitting the cap
    signals a misconfiguration rather than an expected outcome.
    """


class SolverDivergence(MtphaseError):
    """A stationary solve did not reach the requested residual."""


class BracketFailure(MtphaseError):
    """No sign change found while bracketing the zero-velocity detachment rate."""


class NoRootInUnitInterval(MtphaseError):
    """The lifetime-transform quadratic has no root in [0, 1].

    Usually means the recursion depth is too small for the requested shift
    grid, or the rates are invalid.
    """


class NonConvergence(MtphaseError):
    """Iterative refinement exhausted its budget."""


class SingularSystem(MtphaseError):
    """Degenerate linear system in an absorption-functional solve.

    Indicates the requested transform arguments lie outside the finiteness
    region of the functionals.
    """


class DomainError(MtphaseError, ValueError):
    """Arguments outside the mathematical domain of a closed-form routine."""


class InvariantViolation(MtphaseError):
    """A runtime-checked coupling invariant failed; signals an implementation bug."""
