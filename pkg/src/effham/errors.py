"""Exception types raised across the package."""


class EffHamError(Exception):
    """Base class for all package errors."""


class NonHermitianError(EffHamError, ValueError):
    pass


class SupportError(EffHamError, ValueError):
    """A term support is empty, repeated, or outside the lattice."""


class StraddleError(EffHamError, ValueError):
    """A term crosses the cut without lying inside the boundary region."""


class DimensionCapError(EffHamError, ValueError):
    """The dense Hilbert-space dimension exceeds the configured cap."""


class PreconditionError(EffHamError, ValueError):
    """Inputs violate a precondition of a bound or construction."""


class EigenSolverError(EffHamError, RuntimeError):
    pass


class NotProductStateError(EffHamError, ValueError):
    pass


class CacheCorruptionError(EffHamError, IOError):
    pass


class ConfigError(EffHamError, ValueError):
    pass
