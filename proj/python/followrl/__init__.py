"""Python bindings for the followrl car-following toolkit."""

from ._followrl import *  # noqa: F401,F403
from ._followrl import ValidationError, ttc, ttc_summary

__all__ = [name for name in dir() if not name.startswith("_")]
