"""Exception types raised across the package."""


class InvalidInput(ValueError):
    """Malformed graph, vector or count arguments."""


class InvalidParameter(ValueError):
    """Smoothing or statistical parameter outside its admissible range."""


class AbstainRequired(ValueError):
    """A radius was requested for a prediction that must abstain (pA_lower <= 1/2)."""


class ConfigError(ValueError):
    """Missing or inconsistent run configuration."""


class TrainingFailure(RuntimeError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message, epoch=None, loss=None):
        super().__init__(message)
        self.epoch = epoch
        self.loss = loss


class ClassifierFailure(RuntimeError):
    """The base classifier failed on a Monte Carlo sample."""

    def __init__(self, message, sample_index):
        super().__init__(f"{message} (sample index {sample_index})")
        self.sample_index = sample_index
