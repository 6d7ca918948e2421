"""Retrieval-augmented in-context term extraction (C++ core)."""

from ._termret import *  # noqa: F401,F403
from ._termret import Error, __version__  # noqa: F401
