"""Exception types shared across the package."""


class DddeError(Exception):
    """Base class for all package errors."""


class ValidationError(DddeError):
    """Invalid parameter, configuration value, or violated input contract."""


class ShapeError(ValidationError):
    """Array dimensions do not match what an operation expects."""


class DomainError(DddeError):
    """A query point lies outside the support box the model was trained on."""


class DegenerateDataError(DddeError):
    """Data has a zero-range dimension and cannot be normalized."""


class FormatError(DddeError):
    """A file does not follow its declared format (CSV, IDX, checkpoint)."""


class DivergenceError(DddeError):
    """Training produced a non-finite objective value."""

    def __init__(self, epoch: int, iteration: int, value: float):
        self.epoch = epoch
        self.iteration = iteration
        self.value = value
        super().__init__(
            f"non-finite objective {value!r} at epoch {epoch}, iteration {iteration}"
        )
