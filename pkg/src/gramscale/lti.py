"""SISO transfer functions, MIMO transfer matrices and state-space models.

Polynomials are coefficient sequences in *descending* powers of ``s``
everywhere (storage, JSON, function arguments). Dead time is kept exactly
on :class:`RationalTF` and only replaced by a Padé approximant when a
realization is built.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

STABILITY_TOL = 1e-10
CANCEL_TOL = 1e-9
DEFAULT_PADE_ORDER = 2


class LTIError(ValueError):
    """Raised for invalid or unsupported transfer-function operations."""


class PlantFormatError(ValueError):
    """Raised when a plant file cannot be parsed."""


def _as_poly(coeffs) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float)).ravel()
    if arr.size == 0:
        return (0.0,)
    if not np.all(np.isfinite(arr)):
        raise LTIError("polynomial coefficients must be finite")
    nz = np.flatnonzero(arr)
    if nz.size == 0:
        return (0.0,)
    return tuple(float(c) for c in arr[nz[0]:])


def _poly_from_roots(roots, lead: float) -> np.ndarray:
    if len(roots) == 0:
        return np.array([lead])
    return lead * np.real_if_close(np.poly(roots), tol=1e6).real


@dataclass(frozen=True)
class RationalTF:
    """``num(s)/den(s) * exp(-delay*s)``.

    A negative ``delay`` is only produced by :func:`divide` and marks a
    non-causal result (see :attr:`is_causal`).
    """

    num: tuple = (0.0,)
    den: tuple = (1.0,)
    delay: float = 0.0

    def __post_init__(self):
        num = _as_poly(self.num)
        den = _as_poly(self.den)
        if den == (0.0,):
            raise LTIError("denominator must be nonzero")
        delay = float(self.delay)
        if not math.isfinite(delay):
            raise LTIError("delay must be finite")
        if num == (0.0,):
            den, delay = (1.0,), 0.0
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "delay", delay)

    # -- structure ---------------------------------------------------------
    @property
    def num_array(self) -> np.ndarray:
        return np.array(self.num)

    @property
    def den_array(self) -> np.ndarray:
        return np.array(self.den)

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def relative_degree(self) -> int:
        return len(self.den) - len(self.num)

    @property
    def is_zero(self) -> bool:
        return self.num == (0.0,)

    @property
    def is_causal(self) -> bool:
        return self.delay >= 0.0

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.is_zero:
            return np.array([])
        return np.roots(self.num)

    def is_proper(self) -> bool:
        return self.is_zero or len(self.num) <= len(self.den)

    def is_strictly_proper(self) -> bool:
        return self.is_zero or len(self.num) < len(self.den)

    def is_stable(self) -> bool:
        """All poles strictly in the open left half plane (margin 1e-10)."""
        if self.order == 0:
            return True
        return bool(np.all(self.poles().real < -STABILITY_TOL))

    # -- evaluation --------------------------------------------------------
    def evaluate(self, s) -> np.ndarray | complex:
        s = np.asarray(s, dtype=complex)
        val = np.polyval(self.num, s) / np.polyval(self.den, s)
        if self.delay:
            val = val * np.exp(-self.delay * s)
        return val

    def freq_response(self, omega) -> np.ndarray:
        return self.evaluate(1j * np.asarray(omega, dtype=float))

    def dc_gain(self) -> float:
        if self.is_zero:
            return 0.0
        d0 = self.den[-1]
        if d0 == 0.0:
            raise LTIError("integrating channel, no finite DC gain")
        return self.num[-1] / d0

    # -- algebra -----------------------------------------------------------
    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return RationalTF(np.multiply(self.num, other), self.den, self.delay)
        if not isinstance(other, RationalTF):
            return NotImplemented
        return RationalTF(
            np.polymul(self.num, other.num),
            np.polymul(self.den, other.den),
            self.delay + other.delay,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return RationalTF(np.negative(self.num), self.den, self.delay)

    def minreal(self, tol: float = CANCEL_TOL) -> RationalTF:
        """Cancel pole-zero pairs closer than ``tol`` (relative)."""
        if self.is_zero or len(self.num) == 1 or len(self.den) == 1:
            return self
        zeros = list(np.roots(self.num))
        poles = list(np.roots(self.den))
        kept_zeros = []
        cancelled = False
        for z in zeros:
            if poles:
                dist = [abs(z - p) for p in poles]
                k = int(np.argmin(dist))
                if dist[k] <= tol * max(1.0, abs(poles[k])):
                    poles.pop(k)
                    cancelled = True
                    continue
            kept_zeros.append(z)
        if not cancelled:
            return self
        num = _poly_from_roots(kept_zeros, self.num[0])
        den = _poly_from_roots(poles, self.den[0])
        return RationalTF(num, den, self.delay)

    def normalized(self) -> RationalTF:
        """Same function with a monic denominator."""
        lead = self.den[0]
        return RationalTF(np.divide(self.num, lead), np.divide(self.den, lead), self.delay)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {"num": list(self.num), "den": list(self.den), "delay": self.delay}

    @classmethod
    def from_dict(cls, data) -> RationalTF:
        if data is None:
            return cls()
        try:
            return cls(data["num"], data.get("den", [1.0]), data.get("delay", 0.0))
        except (KeyError, TypeError, AttributeError) as exc:
            raise PlantFormatError(f"bad transfer-function entry {data!r}") from exc

    def __repr__(self):
        extra = f", delay={self.delay:g}" if self.delay else ""
        return f"RationalTF(num={list(self.num)}, den={list(self.den)}{extra})"


ZERO_TF = RationalTF()


def is_stable(tf: RationalTF) -> bool:
    return tf.is_stable()


def is_proper(tf: RationalTF) -> bool:
    return tf.is_proper()


def divide(a: RationalTF, b: RationalTF) -> RationalTF:
    """``a/b`` with common factors cancelled; delay is ``a.delay - b.delay``."""
    if b.is_zero:
        raise LTIError("division by an identically zero transfer function")
    q = RationalTF(np.polymul(a.num, b.den), np.polymul(a.den, b.num), a.delay - b.delay)
    return q.minreal()


def pade(delay: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal Padé approximant of ``exp(-delay*s)`` as (num, den)."""
    if delay == 0.0 or order == 0:
        return np.array([1.0]), np.array([1.0])
    if order < 1:
        raise LTIError("Padé order must be positive")
    n = order
    c = np.array([
        math.factorial(2 * n - k) * math.factorial(n)
        / (math.factorial(2 * n) * math.factorial(k) * math.factorial(n - k))
        for k in range(n + 1)
    ])
    powers = delay ** np.arange(n + 1)
    signs = (-1.0) ** np.arange(n + 1)
    # ascending in s -> reverse for descending storage
    num = (c * powers * signs)[::-1]
    den = (c * powers)[::-1]
    return num, den


def rationalize(tf: RationalTF, pade_order: int = DEFAULT_PADE_ORDER) -> RationalTF:
    """Replace the delay by its Padé approximant (delay-free result)."""
    if tf.delay < 0:
        raise LTIError("non-causal transfer function (negative delay)")
    if tf.delay == 0.0 or tf.is_zero:
        return RationalTF(tf.num, tf.den, 0.0)
    if pade_order < 1:
        raise LTIError("a positive Padé order is required for a delayed channel")
    pn, pd = pade(tf.delay, pade_order)
    return RationalTF(np.polymul(tf.num, pn), np.polymul(tf.den, pd), 0.0)


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=float))
        B = np.array(self.B, dtype=float)
        C = np.array(self.C, dtype=float)
        D = np.atleast_2d(np.array(self.D, dtype=float))
        n = A.shape[0] if A.size else 0
        if A.size == 0:
            A = np.zeros((0, 0))
        p, m = D.shape
        if B.size != n * m or C.size != p * n:
            raise LTIError(f"inconsistent dimensions: A {A.shape}, B {B.shape}, C {C.shape}, D {D.shape}")
        B = B.reshape(n, m)
        C = C.reshape(p, n)
        if A.shape != (n, n):
            raise LTIError(f"A must be square, got {A.shape}")
        for arr, name in ((A, "A"), (B, "B"), (C, "C"), (D, "D")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def poles(self) -> np.ndarray:
        if self.n_states == 0:
            return np.array([])
        return np.linalg.eigvals(self.A)

    def is_stable(self) -> bool:
        return bool(np.all(self.poles().real < -STABILITY_TOL))

    def evaluate(self, s: complex) -> np.ndarray:
        """Transfer matrix ``C (sI-A)^-1 B + D`` at one complex point."""
        n = self.n_states
        if n == 0:
            return self.D.astype(complex)
        X = np.linalg.solve(s * np.eye(n) - self.A, self.B.astype(complex))
        return self.C @ X + self.D

    def freq_response(self, omega) -> np.ndarray:
        return np.array([self.evaluate(1j * w) for w in np.atleast_1d(omega)])

    def transform(self, T: np.ndarray) -> StateSpaceModel:
        """Similarity transform with ``x = T z``."""
        Ti = np.linalg.inv(T)
        return StateSpaceModel(Ti @ self.A @ T, Ti @ self.B, self.C @ T, self.D)


def realize(tf: RationalTF, pade_order: int = DEFAULT_PADE_ORDER) -> StateSpaceModel:
    """Minimal controllable-canonical realization of ``tf``.

    The delay (if any) is replaced by a Padé approximant of ``pade_order``
    and pole-zero pairs within a relative 1e-9 are cancelled first.
    """
    if not tf.is_proper():
        raise LTIError("improper transfer function")
    rat = rationalize(tf, pade_order).minreal().normalized()
    den = np.array(rat.den)
    n = len(den) - 1
    num = np.concatenate([np.zeros(n + 1 - len(rat.num)), rat.num])
    d = num[0]
    if n == 0:
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[d]])
    c = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[np.arange(1, n), np.arange(n - 1)] = 1.0
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return StateSpaceModel(A, B, c.reshape(1, n), [[d]])


def zoh(A: np.ndarray, B: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization of ``x' = Ax + Bu``."""
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * h)
    return E[:n, :n], E[:n, n:]


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Plant ``G(s)``: a p-by-m grid of :class:`RationalTF`, row-major by output."""

    entries: tuple
    input_names: tuple = field(default=())
    output_names: tuple = field(default=())

    def __post_init__(self):
        rows = tuple(
            tuple(e if isinstance(e, RationalTF) else RationalTF.from_dict(e) for e in row)
            for row in self.entries
        )
        if not rows or not rows[0]:
            raise LTIError("transfer matrix must have at least one entry")
        m = len(rows[0])
        if any(len(r) != m for r in rows):
            raise LTIError("transfer matrix grid is not rectangular")
        p = len(rows)
        ins = tuple(self.input_names) or tuple(f"u{j + 1}" for j in range(m))
        outs = tuple(self.output_names) or tuple(f"y{i + 1}" for i in range(p))
        if len(ins) != m or len(outs) != p:
            raise LTIError("label list lengths do not match the grid")
        object.__setattr__(self, "entries", rows)
        object.__setattr__(self, "input_names", ins)
        object.__setattr__(self, "output_names", outs)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij) -> RationalTF:
        i, j = ij
        return self.entries[i][j]

    def items(self) -> Iterable[tuple[int, int, RationalTF]]:
        for i, row in enumerate(self.entries):
            for j, g in enumerate(row):
                yield i, j, g

    def evaluate(self, s: complex) -> np.ndarray:
        p, m = self.shape
        out = np.zeros((p, m), dtype=complex)
        for i, j, g in self.items():
            out[i, j] = g.evaluate(s)
        return out

    def permuted(self, row_order: Sequence[int], col_order: Sequence[int]) -> TransferMatrix:
        rows = [[self.entries[i][j] for j in col_order] for i in row_order]
        return TransferMatrix(
            rows,
            [self.input_names[j] for j in col_order],
            [self.output_names[i] for i in row_order],
        )

    def scaled(self, row_scale=None, col_scale=None) -> TransferMatrix:
        """``diag(row_scale) G diag(col_scale)``."""
        p, m = self.shape
        rs = np.ones(p) if row_scale is None else np.asarray(row_scale, float)
        cs = np.ones(m) if col_scale is None else np.asarray(col_scale, float)
        rows = [[g * float(rs[i] * cs[j]) for j, g in enumerate(row)]
                for i, row in enumerate(self.entries)]
        return TransferMatrix(rows, self.input_names, self.output_names)

    # -- plant file format -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "inputs": list(self.input_names),
            "outputs": list(self.output_names),
            "entries": [[g.to_dict() for g in row] for row in self.entries],
        }

    @classmethod
    def from_dict(cls, data) -> TransferMatrix:
        if not isinstance(data, dict) or "entries" not in data:
            raise PlantFormatError("plant JSON must be an object with an 'entries' grid")
        try:
            return cls(data["entries"], data.get("inputs", ()), data.get("outputs", ()))
        except LTIError as exc:
            raise PlantFormatError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> TransferMatrix:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PlantFormatError(f"malformed plant JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> TransferMatrix:
        return cls.from_json(Path(path).read_text())


def dc_gain(G: TransferMatrix) -> np.ndarray:
    """Static gain matrix ``G(0)``; delays have no effect."""
    p, m = G.shape
    K = np.zeros((p, m))
    for i, j, g in G.items():
        try:
            K[i, j] = g.dc_gain()
        except LTIError as exc:
            raise LTIError(f"{exc} (entry {i},{j})") from exc
    return K


def step_response(tf: RationalTF, t) -> np.ndarray:
    """Unit-step response of ``tf`` on a uniform grid ``t`` starting at 0.

    The dead time is applied exactly as a shift (no Padé); the rational part
    is sampled through its exact zero-order-hold recurrence.
    """
    from ._kernels import lti_step_response

    t = np.asarray(t, dtype=float)
    if t.size < 2:
        raise ValueError("need at least two time points")
    h = t[1] - t[0]
    y = np.zeros(t.size)
    if tf.is_zero:
        return y
    sys = realize(RationalTF(tf.num, tf.den), 0)
    k0 = int(np.searchsorted(t, tf.delay - 1e-12 * max(1.0, h)))
    if k0 >= t.size:
        return y
    n = sys.n_states
    if n == 0:
        y[k0:] = sys.D[0, 0]
        return y
    delta = max(t[k0] - tf.delay, 0.0)
    x0 = zoh(sys.A, sys.B, delta)[1][:, 0] if delta > 0 else np.zeros(n)
    Ad, Bd = zoh(sys.A, sys.B, h)
    y[k0:] = lti_step_response(
        np.ascontiguousarray(Ad), np.ascontiguousarray(Bd[:, 0]),
        np.ascontiguousarray(sys.C[0]), float(sys.D[0, 0]), t.size - k0 - 1, np.ascontiguousarray(x0),
    )
    return y
