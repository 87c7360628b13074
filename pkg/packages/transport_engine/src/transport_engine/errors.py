"""Error hierarchy of the transport engine.

Every error the engine raises on purpose derives from ``TransportLabError``;
input problems are also ``ValueError`` and numerical guard trips are also
``RuntimeError`` so callers can catch them with the builtin families.
"""


class TransportLabError(Exception):
    """Base class for engine errors."""


class GeometryError(TransportLabError, ValueError):
    """A point or direction violates a geometric precondition."""


class KernelDomainError(TransportLabError, ValueError):
    """A kernel was evaluated outside its domain of definition."""


class ReconstructionError(TransportLabError, ValueError):
    """Inversion inputs are insufficient or inconsistent."""


class GridMismatchError(TransportLabError, ValueError):
    """Two objects that must share a discretization do not."""


class NumericalGuardError(TransportLabError, RuntimeError):
    """A certified bound or finiteness guard was violated."""


class MembershipError(TransportLabError, ValueError):
    """A phantom lacks the smoothness-class metadata an estimate depends on."""
