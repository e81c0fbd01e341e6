"""Online decentralized tracking for time-varying optimal power flow."""

try:
    from ._gridtrack import *  # noqa: F401,F403
    from ._gridtrack import __doc__  # noqa: F401
except ImportError:  # extension built out-of-tree (plain CMake build)
    from _gridtrack import *  # noqa: F401,F403
    from _gridtrack import __doc__  # noqa: F401
