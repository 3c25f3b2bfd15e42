"""Pure numpy fallback for the compiled recurrence kernels.

Same contracts as ``_ckernels``; used when the extension is not built or
when ``GRAMSCALE_PURE_PYTHON`` is set.
"""
import math

import numpy as np


def lti_scan(Ad, bu, C, du, r, nsteps, threshold):
    Ad = np.ascontiguousarray(Ad, dtype=float)
    C = np.ascontiguousarray(C, dtype=float)
    bu = np.asarray(bu, dtype=float)
    du = np.asarray(du, dtype=float)
    r = np.asarray(r, dtype=float)
    x = np.zeros(Ad.shape[0])
    peak = 0.0
    sumsq = 0.0
    for k in range(nsteps + 1):
        y = C @ x + du
        ay = np.abs(y)
        if not np.all(np.isfinite(y)) or np.any(ay > threshold):
            return sumsq, peak, k
        peak = max(peak, float(ay.max(initial=0.0)))
        e = r - y
        w = 0.5 if k in (0, nsteps) else 1.0
        sumsq += w * math.fsum(e * e) if e.size else 0.0
        if k == nsteps:
            break
        x = Ad @ x + bu
    return sumsq, peak, -1


def lti_step_response(Ad, bu, c, d, nsteps, x0):
    Ad = np.ascontiguousarray(Ad, dtype=float)
    bu = np.asarray(bu, dtype=float)
    c = np.asarray(c, dtype=float)
    out = np.empty(nsteps + 1)
    x = np.array(x0, dtype=float)
    for k in range(nsteps + 1):
        out[k] = c @ x + d
        if k == nsteps:
            break
        x = Ad @ x + bu
    return out
