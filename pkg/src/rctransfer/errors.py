"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates a shape, length or range precondition."""


class DomainError(ValueError):
    """A numerical input or intermediate is outside the function's domain (NaN, inf, ...)."""


class DivergenceError(RuntimeError):
    """A trajectory left the bounded region it is expected to stay in."""

    def __init__(self, message, step=None, stage=None):
        super().__init__(message)
        self.step = step
        self.stage = stage


class ConstructionError(RuntimeError):
    """Random reservoir construction produced an unusable matrix; reseed and retry."""


class IngestError(ValueError):
    """Malformed external data; the message names the offending file rows."""


class ExperimentError(RuntimeError):
    def __init__(self, message, experiment: str = "", seed=None):
        super().__init__(message)
        self.experiment = experiment
        self.seed = seed
