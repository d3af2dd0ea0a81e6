"""Numerical laboratory for MHD in Elsasser variables around a uniform field."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.0.0"

from .grid import DomainSpec, make_domain
from .solver import FieldState

__all__ = ["DomainSpec", "FieldState", "make_domain", "__version__"]
