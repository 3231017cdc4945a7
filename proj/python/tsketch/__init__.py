"""One-pass Tucker sketching and recovery.

Tensors are numpy arrays; they are read and returned in Fortran order.
"""

from ._tsketch import *  # noqa: F401,F403
from ._tsketch import Error  # noqa: F401
