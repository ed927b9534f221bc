"""
❌ Error types
==============
Each error also derives from the builtin it refines, so callers can catch
``ValueError`` / ``RuntimeError`` without importing this module.
"""


class UnfittedError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(UnfittedError, ValueError):
    pass


class GeometryError(UnfittedError, ValueError):
    pass


class EmptyDomainError(GeometryError):
    pass


class DegenerateLevelSetError(GeometryError):
    pass


class DegenerateCutError(GeometryError):
    pass


class DegenerateClipError(GeometryError):
    pass


class QuadratureError(UnfittedError, ValueError):
    pass


class AssemblyError(UnfittedError, ValueError):
    pass


class SingularSystemError(UnfittedError, RuntimeError):
    pass


class ConfigError(UnfittedError, ValueError):
    pass


class OutputError(UnfittedError, OSError):
    pass
