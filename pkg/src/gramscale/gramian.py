"""Lyapunov solves and the three subsystem norms behind the gramian measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .lti import DEFAULT_PADE_ORDER, STABILITY_TOL, LTIError, RationalTF, StateSpaceModel, realize

PSD_CLAMP = 1e-12


class UnstableSystemError(LTIError):
    pass


@dataclass(frozen=True, eq=False)
class GramianPair:
    P: np.ndarray  # controllability
    Q: np.ndarray  # observability


def solve_lyapunov(A, W) -> np.ndarray:
    """Solve ``A X + X A^T + W = 0`` for Hurwitz ``A``.

    Uses the Schur-based Bartels-Stewart solver; the result is symmetrized.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if A.size == 0:
        return np.zeros((0, 0))
    if np.any(np.linalg.eigvals(A).real >= -STABILITY_TOL):
        raise UnstableSystemError("unstable system, gramian undefined")
    X = linalg.solve_continuous_lyapunov(A, -W)
    return 0.5 * (X + X.T)


def gramians(sys: StateSpaceModel) -> GramianPair:
    P = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    Q = solve_lyapunov(sys.A.T, sys.C.T @ sys.C)
    return GramianPair(P, Q)


def hankel_singular_values(sys: StateSpaceModel) -> np.ndarray:
    """Descending Hankel singular values ``sqrt(eig(PQ))``."""
    if sys.n_states == 0:
        return np.array([])
    g = gramians(sys)
    ev = np.linalg.eigvals(g.P @ g.Q).real
    ev = np.where(ev < PSD_CLAMP, np.maximum(ev, 0.0), ev)
    return np.sort(np.sqrt(ev))[::-1]


def _realized(tf: RationalTF, pade_order: int) -> StateSpaceModel:
    if not tf.is_stable():
        raise UnstableSystemError("unstable system, gramian undefined")
    return realize(tf, pade_order)


def norm_hankel(tf: RationalTF, pade_order: int = DEFAULT_PADE_ORDER) -> float:
    if tf.is_zero:
        return 0.0
    hsv = hankel_singular_values(_realized(tf, pade_order))
    return float(hsv[0]) if hsv.size else 0.0


def norm_h2(tf: RationalTF, pade_order: int = DEFAULT_PADE_ORDER) -> float:
    if tf.is_zero:
        return 0.0
    if not tf.is_strictly_proper():
        raise LTIError("H2 norm unbounded")
    sys = _realized(tf, pade_order)
    if sys.n_states == 0:
        return 0.0
    P = solve_lyapunov(sys.A, sys.B @ sys.B.T)
    return float(np.sqrt(max(np.trace(sys.C @ P @ sys.C.T), 0.0)))


def norm_hs_squared(tf: RationalTF, pade_order: int = DEFAULT_PADE_ORDER) -> float:
    """Squared Hilbert-Schmidt norm of the Hankel operator, ``trace(PQ)``."""
    if tf.is_zero:
        return 0.0
    sys = _realized(tf, pade_order)
    if sys.n_states == 0:
        return 0.0
    g = gramians(sys)
    return float(max(np.trace(g.P @ g.Q), 0.0))
