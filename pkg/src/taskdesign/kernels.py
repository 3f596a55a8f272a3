"""Backend selection for the candidate-scoring kernel.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy implementation in ``_kernels_py`` is used.  Setting
``TASKDESIGN_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

MSE, ATE, AUQ, ERUPT = _kernels_py.MSE, _kernels_py.ATE, _kernels_py.AUQ, _kernels_py.ERUPT

try:
    if os.environ.get("TASKDESIGN_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _backend

    BACKEND = "cython"
except ImportError:
    _backend = _kernels_py
    BACKEND = "python"

candidate_values = _backend.candidate_values
python_candidate_values = _kernels_py.candidate_values


def compiled_candidate_values():
    """The compiled kernel, or ``None`` when the extension is unavailable."""
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels.candidate_values
