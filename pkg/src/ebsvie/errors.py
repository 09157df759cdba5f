"""Exception hierarchy shared by all solver modules."""


class EbsvieError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(EbsvieError):
    """Malformed configuration or serialized document."""


class DomainError(EbsvieError):
    """Operation evaluated outside its admissible domain (e.g. t > s)."""


class SimulationError(EbsvieError):
    """Forward path simulation produced a non-finite state."""


class SolverError(EbsvieError):
    """Backward solve failed (rank deficiency, divergence, instability)."""


class NonContractionError(SolverError):
    """Fixed-point iteration failed to contract on the given window."""


class SingularityError(EbsvieError):
    """A variational-flow matrix was numerically singular."""
