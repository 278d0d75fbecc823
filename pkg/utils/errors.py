"""
Exception types raised across the package.

Every type derives from a built-in so callers may catch broadly.
"""


class ShapeError(ValueError):
    """Operand shapes, channels or spatial extents are incompatible."""


class GraphError(RuntimeError):
    """The computation graph cannot be differentiated as requested."""


class NonFiniteError(FloatingPointError):
    """A loss, activation or gradient is NaN or infinite."""


class DivergenceError(RuntimeError):
    """Training loss exceeded the divergence guard."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed, truncated or of another version."""


class ConfigError(ValueError):
    """A configuration file has unknown keys or invalid values."""


class ImageFormatError(ValueError):
    """An image file is unreadable, colour, or of an unsupported format."""
