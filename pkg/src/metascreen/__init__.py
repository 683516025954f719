"""Binary-pixel THz metasurface screens: surrogate spectra, networks and experiments."""
from ._errors import DomainError

__version__ = "0.1.0"

__all__ = ["DomainError", "__version__"]
