"""Select the compiled kernels when available, else the pure-Python ones.

Set ``FRCVP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as python

compiled = None
if os.environ.get("FRCVP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        compiled = None

backend = compiled if compiled is not None else python
BACKEND_NAME = "compiled" if compiled is not None else "python"

atd_buckets = backend.atd_buckets
enumerate_best = backend.enumerate_best
rank_one_update = backend.rank_one_update
