"""Exception hierarchy shared by all maskforge modules."""


class MaskforgeError(Exception):
    """Base class for every error raised deliberately by maskforge."""


class DataError(MaskforgeError, ValueError):
    """Malformed or inconsistent input data (files, images, geometry)."""


class LayoutError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class KernelFormatError(DataError):
    pass


class DimensionError(DataError):
    pass


class ResourceError(MaskforgeError):
    """A requested raster exceeds the configured pixel budget."""


class DivergenceError(MaskforgeError, RuntimeError):
    """An iterative optimizer produced a non-finite objective."""

    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class OpcError(MaskforgeError):
    pass
