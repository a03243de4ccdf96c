"""Error types shared across the package."""


class ConfigError(ValueError):
    """A shape/dimension contract or configuration value is violated."""


class IntegrityError(RuntimeError):
    """A persisted artifact (checkpoint, code file) is corrupt or inconsistent."""


class UnsupportedVersionError(IntegrityError):
    """A persisted artifact declares a format version this build cannot read."""


class NumericError(RuntimeError):
    """A forward pass produced non-finite values."""

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        if layer is not None:
            message = f"{message} (layer {layer})"
        super().__init__(message)
