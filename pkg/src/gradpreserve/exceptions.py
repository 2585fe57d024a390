"""Exception types raised across the package."""


class InvalidImage(ValueError):
    """Image is not a 2-D grid of values in [0, 1] with both sides >= 3."""


class ShapeMismatch(ValueError):
    pass


class InvalidLatent(ValueError):
    """Latent field contains non-finite values."""


class InsufficientData(ValueError):
    pass


class ImageIOError(OSError):
    """Image file could not be read or written. Carries the offending path."""

    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
