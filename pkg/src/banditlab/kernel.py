"""Backend selection for the horizon loop.

The compiled extension is used when it imports; set
``BANDITLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernel

python_run_episode = _pykernel.run_episode

try:
    if os.environ.get("BANDITLAB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _ckernel
except ImportError:
    _ckernel = None

compiled_run_episode = _ckernel.run_episode if _ckernel is not None else None

BACKEND = "cython" if _ckernel is not None else "python"
run_episode = compiled_run_episode or python_run_episode
