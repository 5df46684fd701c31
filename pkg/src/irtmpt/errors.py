"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input probability or parameter is outside its legal domain."""


class GraphStructureError(ValueError):
    """The process graph violates a structural requirement (cycle, bad root...)."""


class DimensionMismatchError(ValueError):
    """Two objects that must share (T, K) dimensions do not."""


class NonCanonicalError(ValueError):
    """Operation requires sum-to-zero canonical parameters."""


class ZeroProbabilityError(ValueError):
    """A conditioning event or observed category has (numerically) zero probability."""


class RangeViolationError(ValueError):
    """A transformed probability left the open unit interval."""

    def __init__(self, entry: str, value: float, bound: str):
        self.entry = entry
        self.value = value
        self.bound = bound
        super().__init__(f"{entry} = {value!r} violates {bound}")


class GenerationError(RuntimeError):
    """The equivalent-pair generator exhausted its retry budget."""


class InternalConsistencyError(RuntimeError):
    """A generated object failed its own verification; indicates a bug."""


class DataFormatError(ValueError):
    """A parameter/bundle/counts file is malformed; message carries field context."""
