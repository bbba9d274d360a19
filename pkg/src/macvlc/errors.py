"""Exception types raised across the package."""

from __future__ import annotations

import math


class MacVlcError(Exception):
    """Base class for all package errors."""


class NonStochastic(MacVlcError, ValueError):
    def __init__(self, row, total):
        self.row = tuple(row)
        self.sum = float(total)
        super().__init__(f"row {self.row} sums to {self.sum!r}, not 1")


class NegativeEntry(MacVlcError, ValueError):
    def __init__(self, index):
        self.index = tuple(index)
        super().__init__(f"negative transition probability at {self.index}")


class UnknownName(MacVlcError, KeyError):
    pass


class SymbolOutOfRange(MacVlcError, IndexError):
    pass


class NoConvergence(MacVlcError, RuntimeError):
    pass


class NoPositiveRoot(MacVlcError, ValueError):
    """The increment is non-positive almost surely, so the walk never crosses.

    The root is reported as ``+inf`` through :attr:`sentinel`.
    """

    sentinel = math.inf


class NonNegativeDrift(MacVlcError, ValueError):
    pass


class DegenerateQuery(MacVlcError, ValueError):
    pass


class NotPentagonShaped(MacVlcError, ValueError):
    pass


class MessageOutOfRange(MacVlcError, IndexError):
    pass


class NonPositiveRate(MacVlcError, ValueError):
    pass


class DegenerateOutput(MacVlcError, ValueError):
    pass
