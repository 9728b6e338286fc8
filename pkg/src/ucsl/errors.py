"""Exception hierarchy shared by every ucsl module."""


class UcslError(Exception):
    """Base class for all library errors."""


class DataFormatError(UcslError, ValueError):
    """Malformed input file or dataset."""


class MissingColumnError(DataFormatError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} not found in header")
        self.column = column


class DimensionMismatchError(UcslError, ValueError):
    def __init__(self, expected: int, actual: int, what: str = "feature dimension"):
        super().__init__(f"{what} mismatch: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class InsufficientSamplesError(UcslError, ValueError):
    pass


class DegenerateWeightsError(UcslError, ValueError):
    pass


class ConvergenceError(UcslError, RuntimeError):
    def __init__(self, message: str, grad_norm: float):
        super().__init__(f"{message} (final gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class UnsupportedOperationError(UcslError, TypeError):
    pass


class EmptyBasisError(UcslError, ValueError):
    pass


class ClusterCollapseError(UcslError, RuntimeError):
    def __init__(self, cluster: int, message: str = ""):
        super().__init__(f"cluster {cluster} collapsed" + (f": {message}" if message else ""))
        self.cluster = cluster


class EnsembleError(UcslError, RuntimeError):
    pass
