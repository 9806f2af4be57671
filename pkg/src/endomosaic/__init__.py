"""Panoramic mosaicking of corneal endothelium microscope sweeps."""

__version__ = "0.1.0"

from .errors import DataError, MosaicError, RegistrationError

__all__ = ["DataError", "MosaicError", "RegistrationError", "__version__"]
