"""Exception hierarchy shared by the solvers, the surrogate and the CLI."""


class BifiError(Exception):
    """Base class for all errors raised by this package."""


class InvalidState(BifiError, ValueError):
    pass


class NonPositiveDensity(InvalidState):
    def __init__(self, cell, value):
        self.cell = int(cell)
        self.value = float(value)
        super().__init__(f"non-positive density {self.value:.6g} in cell {self.cell}")


class NonPositiveTemperature(InvalidState):
    def __init__(self, cell, value):
        self.cell = int(cell)
        self.value = float(value)
        super().__init__(f"non-positive temperature {self.value:.6g} in cell {self.cell}")


class GridTooLarge(BifiError, ValueError):
    pass


class GridMismatch(BifiError, ValueError):
    pass


class UnsupportedExponent(BifiError, ValueError):
    pass


class StateBlowup(BifiError, FloatingPointError):
    pass


class BlockLayoutMismatch(BifiError, ValueError):
    pass


class BudgetExceedsRank(BifiError):
    pass


class IdMismatch(BifiError, ValueError):
    pass


class SampleMismatch(BifiError, ValueError):
    pass


class ConfigError(BifiError, ValueError):
    pass
