"""Hot loops of the simulator, compiled when available.

``BACKEND`` is ``"cython"`` when the extension imported, otherwise
``"python"``. Setting ``GRAMSCALE_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("GRAMSCALE_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

if compiled_backend is not None:
    lti_scan = compiled_backend.lti_scan
    lti_step_response = compiled_backend.lti_step_response
    BACKEND = "cython"
else:
    lti_scan = python_backend.lti_scan
    lti_step_response = python_backend.lti_step_response
    BACKEND = "python"

__all__ = ["BACKEND", "lti_scan", "lti_step_response", "python_backend", "compiled_backend"]
