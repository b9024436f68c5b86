"""Exception classes for the specific failure modes we want callers to be able to catch"""

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from symmkit.bnb import SolveResult


class DimensionMismatchError(ValueError):
    """Raised when permutations, vectors, or instances disagree on the number of variables"""


class InstanceFormatError(ValueError):
    """Raised when an instance, domain, cycle notation, tree, or manifest document cannot be understood"""


class PrehandleError(ValueError):
    """Raised when a prehandling structure is asked to do something it cannot, e.g. branch outside of [0, n)"""


class InfeasibleError(RuntimeError):
    """Raised inside propagators when some variable domain becomes empty"""


class CapExceededError(RuntimeError):
    """Raised when an enumeration would exceed its configured cap

    The ``count`` attribute holds how many elements had been produced when the cap was hit.
    """

    def __init__(self, message: str, count: int, cap: int):
        super().__init__(message)
        self.count = count
        self.cap = cap


class LimitReachedError(RuntimeError):
    """Raised when a solve hits its node or time limit, ``result`` holds the incumbent and tree so far"""

    def __init__(self, message: str, result: "SolveResult"):
        super().__init__(message)
        self.result = result
