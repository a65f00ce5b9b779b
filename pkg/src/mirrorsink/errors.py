"""Exception hierarchy shared by the library and the CLI."""


class MirrorsinkError(Exception):
    """Base class for all package errors."""


class GeometryError(MirrorsinkError, ValueError):
    """Degenerate geometry, e.g. a wall with coincident endpoints."""


class ConfigurationError(MirrorsinkError, ValueError):
    """Invalid scene, database or experiment configuration."""


class NumericalError(MirrorsinkError, ArithmeticError):
    """A numerical routine could not produce a finite answer."""
