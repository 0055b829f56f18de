"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad construction parameters or an instance that fails its contract."""


class NoPathError(Exception):
    """No directed path exists between the requested endpoints."""


class SizeError(ValueError):
    """Problem too large for the requested exact method."""


class InternalStateError(RuntimeError):
    """Mechanism state lost price/utilization coherence; aborting the run."""


class SearchError(RuntimeError):
    """A numerical search exhausted its budget without bracketing a result."""
