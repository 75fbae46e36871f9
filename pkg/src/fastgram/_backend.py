"""Selects the compiled core at import time, falling back to pure Python.

Set ``FASTGRAM_PURE=1`` to force the pure-Python paths.
"""

import os

core = None
if not os.environ.get("FASTGRAM_PURE"):
    try:
        from . import _core as core  # noqa: F811
    except ImportError:
        core = None

NAME = "compiled" if core is not None else "python"
