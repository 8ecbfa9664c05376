class UnsupportedScaleError(ValueError):
    """Requested size exceeds what an exact/brute-force routine supports."""


class DConstructionError(RuntimeError):
    """No positive symmetric D satisfies the integrability constraints."""

    def __init__(self, message, nullspace=None):
        super().__init__(message)
        self.nullspace = nullspace


class UndefinedBoundError(ValueError):
    """The coupling-width bound needs a strictly positive energy gap."""
