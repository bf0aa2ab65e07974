"""Exception hierarchy shared by the library and the command line.

Each error carries the process exit code the CLI maps it to.
"""


class MfsegError(Exception):
    exit_code = 2


class DimensionError(MfsegError, ValueError):
    """Image side is not a power of two, too small, or not square."""


class ScaleRangeError(MfsegError, ValueError):
    """Requested scales are empty or exceed what the image supports."""


class ConfigError(MfsegError, ValueError):
    pass


class ImageFormatError(MfsegError, ValueError):
    pass


class CompositionError(MfsegError, ValueError):
    """Scene regions overlap or leave the image."""


class ShapeMismatchError(MfsegError, ValueError):
    exit_code = 3


class NumericError(MfsegError, ArithmeticError):
    exit_code = 4


class ParameterDomainError(NumericError):
    """A parameter left its support (e.g. a nonpositive variance)."""


class EmptyClassError(NumericError):
    def __init__(self, scale: int, label: int):
        super().__init__(f"class {label + 1} has no sites at scale j={scale}")
        self.scale = scale
        self.label = label


class DegenerateClusteringError(NumericError):
    pass


class LabelRangeError(MfsegError, ValueError):
    """A label grid holds values outside the K classes."""
