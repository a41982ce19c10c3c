"""Exception hierarchy.

Validation problems (bad inputs) derive from ``ValueError`` so callers that
only care about "bad argument" can catch that; numerical failures derive
from ``SolverError``.
"""


class DomainError(ValueError):
    """An argument lies outside the operation's domain."""


class ConfigError(ValueError):
    """A run configuration failed validation."""


class SolverError(RuntimeError):
    """A numerical procedure could not deliver its contract."""


class PoleError(SolverError):
    """Secular function evaluated on (or within one ulp of) a pole."""

    def __init__(self, index, nu):
        self.index = index
        self.nu = nu
        super().__init__(f"nu={nu!r} hits the pole -b_{index} (1-based index {index})")


class ConditioningError(SolverError):
    """Bracket too narrow to resolve the root in double precision."""


class ConsistencyError(SolverError):
    """A constructed eigenvector fails its own eigen-equation."""


class DegenerateBasisError(SolverError):
    """Projection onto a span complement is numerically zero."""


class StiffnessError(SolverError):
    """Step-size control underflowed in the ODE integrator."""

    def __init__(self, message, tau_reached):
        self.tau_reached = tau_reached
        super().__init__(f"{message} (reached tau={tau_reached!r})")
