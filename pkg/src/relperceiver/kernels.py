"""Sampler kernel backend, chosen at import.

The compiled extension is used when it has been built; otherwise the
pure-Python module is used.  Set ``RELPERCEIVER_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("RELPERCEIVER_PURE_PYTHON") != "1":
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "compiled" if compiled_backend is not None else "python"

select_past = backend.select_past
bfs_past = backend.bfs_past


def available():
    return ["python"] + (["compiled"] if compiled_backend is not None else [])


class use:
    """Context manager that routes the sampler through a named backend."""

    def __init__(self, name):
        if name not in available():
            raise ValueError(f"backend {name!r} not available; have {available()}")
        self.name = name

    def __enter__(self):
        global select_past, bfs_past, BACKEND_NAME
        self._saved = (select_past, bfs_past, BACKEND_NAME)
        mod = compiled_backend if self.name == "compiled" else python_backend
        select_past, bfs_past, BACKEND_NAME = mod.select_past, mod.bfs_past, self.name
        return mod

    def __exit__(self, *exc):
        global select_past, bfs_past, BACKEND_NAME
        select_past, bfs_past, BACKEND_NAME = self._saved
        return False
