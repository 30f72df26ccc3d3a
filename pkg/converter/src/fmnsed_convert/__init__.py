"""Checkpoint conversion and cross-runtime verification for fmnsed."""

__version__ = "0.1.0"

from .convert import ConversionError, convert, fetch_inventory  # noqa: F401
from .fmnw import read_fmnw, write_fmnw  # noqa: F401
from .namemap import MapRule, build_namemap  # noqa: F401
from .verify import VerificationError, verify  # noqa: F401
