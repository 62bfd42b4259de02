"""LQG dynamic portfolio allocation toolkit.

Thin wrapper over the C++ core: state-space market models (return
predictability, price impact, partial observability) turned into optimal
allocation policies via steady-state Kalman filtering and LQR, plus the
closed-loop analysis tools (no-arbitrage check, impulse responses, analytic
and Monte Carlo performance, capacity curves).
"""

from ._lqgalloc import *  # noqa: F401,F403
from ._lqgalloc import __doc__ as _core_doc  # noqa: F401
