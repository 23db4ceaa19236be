class InputError(ValueError):
    """Caller passed data that violates an operation's precondition."""


class ConfigError(Exception):
    """Mismatched or invalid configuration (vocabulary hash, sizes, grids)."""


class TrainingError(RuntimeError):
    pass


class DivergenceError(TrainingError):
    """Loss became non-finite during training."""
