"""Shared exception base for the package.

Every library-specific error derives from HyperallocError so callers can
separate modelling problems from plain programming mistakes.
"""


class HyperallocError(Exception):
    """Base class for all errors raised by hyperalloc."""
