from __future__ import annotations

from importlib import metadata

from .measures import AtomicMeasure, Box, DomainError
from .settings import Settings

# ---- version ----
# Try to read the installed package version; fall back to the in-repo default.
try:
    __version__ = metadata.version("blowzoom")
except metadata.PackageNotFoundError:  # running from source
    __version__ = "0.1.0"


__all__ = ["__version__", "AtomicMeasure", "Box", "DomainError", "Settings"]
