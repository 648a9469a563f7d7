"""Scatter-image injection-attack detection with federated averaging."""

try:
    from ._fedguard import *  # noqa: F401,F403
    from ._fedguard import __version__  # noqa: F401
except ImportError:  # in-tree build: extension sits next to the package
    from _fedguard import *  # noqa: F401,F403
    from _fedguard import __version__  # noqa: F401
