"""Model-agnostic explanations for right-censored survival models."""

try:
    from ._survexplain import *  # noqa: F401,F403  (installed layout)
    from ._survexplain import __version__  # noqa: F401
except ImportError:  # build-tree layout: extension next to the package dir
    from _survexplain import *  # noqa: F401,F403
    from _survexplain import __version__  # noqa: F401
