"""Exception types raised across the package.

Each error carries an ``exit_code`` used by the command line front end:
2 for configuration problems, 3 for data problems and 4 for numerical
failures.
"""


class SicomoreError(Exception):
    exit_code = 3


class ConfigError(SicomoreError):
    exit_code = 2


class DataError(SicomoreError):
    exit_code = 3


class NumericalError(SicomoreError):
    exit_code = 4


class DimensionMismatch(DataError):
    def __init__(self, component):
        self.component = component
        super().__init__(component)


class AllZeroRow(DataError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} has zero total count")


class NonPositiveEntry(DataError):
    def __init__(self, row, col):
        self.row, self.col = row, col
        super().__init__(f"entry ({row}, {col}) is not strictly positive")


class TooFewVariables(DataError):
    pass


class EmptyGroup(DataError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"group {group} has no members")


class InsufficientGroups(DataError):
    pass


class InvalidP(DataError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"p-value at index {index} is outside [0, 1]")


class NonFiniteInput(DataError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, lam, n_iter):
        self.lam = lam
        self.n_iter = n_iter
        super().__init__(f"no convergence at lambda={lam:.6g} after {n_iter} sweeps")


class RankDeficient(NumericalError):
    def __init__(self, g, m):
        self.g, self.m = g, m
        super().__init__(f"design for pair ({g}, {m}) is rank deficient")


class SingularDesign(NumericalError):
    pass


class StageError(SicomoreError):
    """A pipeline stage failed; wraps the original cause."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", None) or _numeric_code(cause)
        super().__init__(f"{stage}: {cause}")


def _numeric_code(cause) -> int:
    import numpy as np

    if isinstance(cause, (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError)):
        return NumericalError.exit_code
    return DataError.exit_code
