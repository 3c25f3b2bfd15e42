"""Rescaling of gramian interaction matrices.

Column scaling gives every input equal weight, row scaling every output;
the row-or-column rule picks whichever orientation holds the smallest sum;
Sinkhorn-Knopp balancing makes rows and columns sum to one simultaneously,
which also removes any dependence on the original input/output scaling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interaction import InteractionMatrix, Measure, Scaling

SK_TOL = 1e-3
SK_MAX_ITER = 10_000


class ScalingError(ValueError):
    pass


class SinkhornConvergenceError(ScalingError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class SinkhornReport:
    iterations: int
    final_epsilon: float
    row_scale: np.ndarray
    col_scale: np.ndarray


def _coerce(im) -> InteractionMatrix:
    if not isinstance(im, InteractionMatrix):
        im = InteractionMatrix(np.asarray(im, dtype=float))
    if im.measure is Measure.RGA:
        raise ScalingError("scaling is only defined for nonnegative gramian interaction matrices")
    if np.any(im.values < 0):
        raise ScalingError("interaction matrix has negative entries")
    return im


def scale_columns(im) -> InteractionMatrix:
    im = _coerce(im)
    sums = im.values.sum(axis=0)
    bad = np.flatnonzero(sums <= 0)
    if bad.size:
        raise ScalingError(f"zero column sum for input {im.input_names[bad[0]]!r}")
    return im.with_values(im.values / sums, scaling=Scaling.COLUMN)


def scale_rows(im) -> InteractionMatrix:
    im = _coerce(im)
    sums = im.values.sum(axis=1)
    bad = np.flatnonzero(sums <= 0)
    if bad.size:
        raise ScalingError(f"zero row sum for output {im.output_names[bad[0]]!r}")
    return im.with_values(im.values / sums[:, None], scaling=Scaling.ROW)


def scale_row_or_column(im) -> InteractionMatrix:
    """Scale rows if the smallest of all row and column sums is a row sum.

    Ties go to columns.
    """
    im = _coerce(im)
    row_min = im.values.sum(axis=1).min()
    col_min = im.values.sum(axis=0).min()
    out = scale_rows(im) if row_min < col_min else scale_columns(im)
    return out.with_values(out.values, scaling=Scaling.ROW_OR_COLUMN)


def sinkhorn_knopp(im, tol: float = SK_TOL, max_iter: int = SK_MAX_ITER):
    """Balance a square nonnegative IM to doubly stochastic form.

    Iterates ``c = 1/(G^T r)``, ``r = 1/(G c)`` from ``r = e`` and stops once
    ``eps = ||c_k / c_{k+1} - e||_1 <= tol`` and every row and column sum of
    ``diag(r) G diag(c)`` is within ``tol`` of one.

    Returns
    -------
    (InteractionMatrix, SinkhornReport)

    Raises
    ------
    SinkhornConvergenceError
        After ``max_iter`` iterations; usually the matrix lacks total support.
    """
    im = _coerce(im)
    G = im.values
    n, m = G.shape
    if n != m:
        raise ScalingError("Sinkhorn-Knopp balancing needs a square interaction matrix")
    r = np.ones(n)
    c = np.ones(n)
    eps = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(1, max_iter + 1):
            c_next = 1.0 / (G.T @ r)
            r = 1.0 / (G @ c_next)
            if not (np.all(np.isfinite(c_next)) and np.all(np.isfinite(r))):
                report = SinkhornReport(k, np.inf, r, c_next)
                raise SinkhornConvergenceError("Sinkhorn-Knopp diverged (zero row or column)", report)
            eps = float(np.abs(c / c_next - 1.0).sum())
            c = c_next
            if eps <= tol:
                B = r[:, None] * G * c[None, :]
                dev = max(np.abs(B.sum(axis=0) - 1).max(), np.abs(B.sum(axis=1) - 1).max())
                if dev <= tol:
                    report = SinkhornReport(k, eps, r.copy(), c.copy())
                    return im.with_values(B, scaling=Scaling.SINKHORN_KNOPP), report
    report = SinkhornReport(max_iter, eps, r, c)
    raise SinkhornConvergenceError(
        f"Sinkhorn-Knopp did not converge in {max_iter} iterations (eps={eps:.3g})", report
    )


def apply_scaling(im, scaling, sk_tol: float = SK_TOL, sk_max_iter: int = SK_MAX_ITER) -> InteractionMatrix:
    scaling = Scaling.parse(scaling)
    if scaling is Scaling.NONE:
        return _coerce(im) if not isinstance(im, InteractionMatrix) else im
    if scaling is Scaling.ROW:
        return scale_rows(im)
    if scaling is Scaling.COLUMN:
        return scale_columns(im)
    if scaling is Scaling.ROW_OR_COLUMN:
        return scale_row_or_column(im)
    return sinkhorn_knopp(im, sk_tol, sk_max_iter)[0]


def emphasize(im, axis: str, index: int, factor: float) -> InteractionMatrix:
    """Multiply one row (an output) or column (an input) by ``factor``."""
    if not isinstance(im, InteractionMatrix):
        im = InteractionMatrix(np.asarray(im, dtype=float))
    if factor <= 0:
        raise ValueError("emphasis factor must be positive")
    axis = axis.lower()
    if axis not in ("row", "column"):
        raise ValueError("axis must be 'row' or 'column'")
    size = im.shape[0] if axis == "row" else im.shape[1]
    if not 0 <= index < size:
        raise IndexError(f"{axis} index {index} out of range 0..{size - 1}")
    v = im.values.copy()
    if axis == "row":
        v[index, :] *= factor
    else:
        v[:, index] *= factor
    return im.with_values(v, emphasis=im.emphasis + ((axis, index, float(factor)),))
