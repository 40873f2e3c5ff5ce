"""Python bindings for the fastssm C++ library."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, monomial_ordering  # noqa: F401
