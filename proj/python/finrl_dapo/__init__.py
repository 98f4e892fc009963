"""Python surface of the DAPO trading toolkit.

Everything is implemented in the C++ core; this package re-exports the
pybind11 module.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
