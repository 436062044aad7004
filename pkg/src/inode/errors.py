"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


class FormatError(ValueError):
    """Malformed binary payload or field that does not fit the wire layout."""


class DatasetError(RuntimeError):
    """Dataset directory or statistics pool unusable."""


class NaNLossError(RuntimeError):
    """Training loss became non-finite; carries the epoch and batch index."""

    def __init__(self, epoch, batch_index):
        super().__init__(f"loss became non-finite at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index
