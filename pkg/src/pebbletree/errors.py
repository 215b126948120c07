"""Exception types shared across the package."""


class PebbleTreeError(Exception):
    """Base class for library-specific errors."""


class InvalidTreeError(PebbleTreeError, ValueError):
    """Edge list does not describe a tree (wrong count, cycle, disconnected)."""


class InstanceFormatError(PebbleTreeError, ValueError):
    """Instance or plan text does not conform to the documented format."""


class InfeasibleInstanceError(PebbleTreeError, ValueError):
    """Pebble and target sets cannot be matched up (|P| != |B|)."""


class BudgetExceededError(PebbleTreeError, RuntimeError):
    """An oracle search outgrew its configured state or expansion budget."""


class KernelError(PebbleTreeError, RuntimeError):
    """A solver kernel violated one of its internal invariants; this is a bug."""
