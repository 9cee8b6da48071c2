"""Exception hierarchy shared by every module."""


class NetTreeError(Exception):
    """Base class for all library errors."""


class InputError(NetTreeError, ValueError):
    """Malformed input data (bad CSV row, dimension mismatch, ...)."""


class DuplicatePointError(InputError):
    """Two input rows have identical coordinates."""


class ParameterError(NetTreeError, ValueError):
    """Net-tree parameters violate a construction constraint."""


class StructureError(NetTreeError):
    """A structural edit was requested that the tree cannot perform."""


class StateError(NetTreeError):
    """An operation was called in the wrong lifecycle state."""


class InvariantError(NetTreeError):
    """An internal invariant was found broken during construction."""
