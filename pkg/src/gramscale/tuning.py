"""Per-loop controller synthesis: FOPDT fit, lambda-tuned PI, IMC."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .lti import (
    DEFAULT_PADE_ORDER,
    STABILITY_TOL,
    LTIError,
    RationalTF,
    pade,
    step_response,
)

FIT_POINTS = 2000
HORIZON_TIME_CONSTANTS = 5.0


class TuningError(ValueError):
    pass


@dataclass(frozen=True)
class FOPDTModel:
    """``K exp(-L s) / (1 + T s)``."""

    K: float
    T: float
    L: float

    def __post_init__(self):
        if not self.T > 0:
            raise TuningError("FOPDT time constant must be positive")
        if self.L < 0:
            raise TuningError("FOPDT dead time must be nonnegative")

    def step(self, t) -> np.ndarray:
        tau = np.asarray(t, dtype=float) - self.L
        return np.where(tau > 0, self.K * -np.expm1(-np.maximum(tau, 0) / self.T), 0.0)

    def as_tf(self) -> RationalTF:
        return RationalTF([self.K], [self.T, 1.0], self.L)


@dataclass(frozen=True)
class PIController:
    """``Kp (1 + 1/(Ti s))``."""

    Kp: float
    Ti: float

    def __post_init__(self):
        if not self.Ti > 0:
            raise TuningError("integral time must be positive")

    def as_tf(self) -> RationalTF:
        return RationalTF([self.Kp * self.Ti, self.Kp], [self.Ti, 0.0])


@dataclass(frozen=True)
class IMCController:
    controller: RationalTF
    epsilon: float
    q: int
    g_plus: RationalTF
    g_minus: RationalTF

    def as_tf(self) -> RationalTF:
        return self.controller


def slowest_time_constant(tf: RationalTF) -> float:
    poles = tf.poles()
    if poles.size == 0:
        return 0.0
    return float(np.max(1.0 / np.abs(poles.real)))


def fit_horizon(tf: RationalTF) -> float:
    """Fit window: the dead time plus five slowest time constants."""
    return tf.delay + HORIZON_TIME_CONSTANTS * max(slowest_time_constant(tf), 1e-3)


def _trapz_weights(t: np.ndarray) -> np.ndarray:
    h = t[1] - t[0]
    w = np.full(t.size, h)
    w[0] = w[-1] = h / 2
    return w


def fopdt_objective(model: FOPDTModel, t: np.ndarray, y: np.ndarray) -> float:
    """Trapezoid integral of the squared step-response mismatch."""
    e = y - model.step(t)
    return float(np.dot(_trapz_weights(t), e * e))


def _crossing(t, yn, level):
    idx = np.flatnonzero(yn >= level)
    if idx.size == 0:
        return None
    k = idx[0]
    if k == 0:
        return t[0]
    y0, y1 = yn[k - 1], yn[k]
    return t[k - 1] + (level - y0) / (y1 - y0) * (t[k] - t[k - 1])


def _initial_guesses(t, yn):
    """Area-method and two-point starts, both on the normalized response."""
    h = t[1] - t[0]
    w = _trapz_weights(t)
    guesses = []
    t_ar = float(np.dot(w, 1.0 - yn))  # L + T
    if t_ar > 0:
        m = t <= t_ar
        a1 = float(np.trapezoid(yn[m], t[m])) if m.sum() > 1 else 0.0
        T0 = math.e * a1
        L0 = t_ar - T0
        if T0 > 0 and L0 >= 0:
            guesses.append((T0, L0))
        else:
            t63 = _crossing(t, yn, 1 - math.exp(-1))
            if t63 is not None:
                guesses.append((max(t63, h), 0.0))
    t28 = _crossing(t, yn, 1 - math.exp(-1 / 3))
    t63 = _crossing(t, yn, 1 - math.exp(-1))
    if t28 is not None and t63 is not None and t63 > t28:
        T0 = 1.5 * (t63 - t28)
        guesses.append((T0, max(t63 - T0, 0.0)))
    if not guesses:
        guesses.append((max(t_ar, h), 0.0))
    return guesses


@functools.lru_cache(maxsize=8192)
def fit_fopdt(tf: RationalTF) -> FOPDTModel:
    """Least-squares first-order-plus-dead-time approximation.

    ``K`` is the exact static gain; ``(T, L)`` minimize the integrated squared
    step-response error over :func:`fit_horizon`.
    """
    if not tf.is_stable():
        raise TuningError("FOPDT fit requires a stable transfer function")
    K = tf.dc_gain()
    if K == 0.0:
        raise TuningError("no first-order approximant")
    H = fit_horizon(tf)
    t = np.linspace(0.0, H, FIT_POINTS + 1)
    y = step_response(tf, t)
    sw = np.sqrt(_trapz_weights(t))

    def resid(p):
        T, L = p
        tau = t - L
        on = tau > 0
        yhat = np.where(on, K * -np.expm1(-np.where(on, tau, 0.0) / T), 0.0)
        return sw * (y - yhat)

    def jac(p):
        T, L = p
        tau = t - L
        on = tau > 0
        ex = np.where(on, np.exp(-np.where(on, tau, 0.0) / T), 0.0)
        # residual = sw * (y - yhat); both partials of yhat are negative
        dT = K * ex * np.where(on, tau, 0.0) / T**2
        dL = K * ex / T
        return sw[:, None] * np.column_stack([dT, dL])

    lo = [1e-9 * H, 0.0]
    hi = [100.0 * H, H]
    best = None
    for T0, L0 in _initial_guesses(t, y / K):
        x0 = np.clip([T0, L0], lo, [h * 0.999 for h in hi])
        x0[0] = max(x0[0], 1e-6 * H)
        sol = least_squares(resid, x0, jac=jac, bounds=(lo, hi), method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
        if best is None or sol.cost < best.cost:
            best = sol
    T, L = (float(v) for v in best.x)
    return FOPDTModel(K, T, L)


def lambda_pi(model: FOPDTModel, eta: float) -> PIController:
    """Lambda tuning with target closed-loop time constant ``eta * T``."""
    if model.K == 0:
        raise TuningError("zero static gain, lambda tuning undefined")
    if not eta > 0:
        raise TuningError("eta must be positive")
    lam = eta * model.T
    return PIController(Kp=model.T / (model.K * (model.L + lam)), Ti=model.T)


def _trim(p, rel=1e-12) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    scale = np.max(np.abs(p)) if p.size else 0.0
    if scale == 0:
        return np.array([0.0])
    nz = np.flatnonzero(np.abs(p) > rel * scale)
    return p[nz[0]:]


def imc_factorize(tf: RationalTF, pade_order: int = DEFAULT_PADE_ORDER):
    """Split into an all-pass part (delay + RHP zeros) and an invertible part.

    Returns ``(Np, Dp, Nm, Dm, pd)`` with ``g+ = Np/Dp`` (unit static gain),
    ``g- = Nm * Dp / (Dm * pd)`` and ``pd`` the Pade denominator (1 without delay).
    """
    zeros = tf.zeros()
    nmp = zeros[zeros.real > STABILITY_TOL]
    lhp = zeros[zeros.real <= STABILITY_TOL]
    # (z - s) / (s + conj(z)) per RHP zero
    Np = np.real_if_close(np.poly(nmp) * (-1.0) ** len(nmp), tol=1e6).real if len(nmp) else np.array([1.0])
    Dp = np.real_if_close(np.poly(-np.conj(nmp)), tol=1e6).real if len(nmp) else np.array([1.0])
    pd = np.array([1.0])
    if tf.delay > 0:
        pn, pd = pade(tf.delay, pade_order)
        Np, Dp = np.polymul(Np, pn), np.polymul(Dp, pd)
    lead = tf.num[0] * (-1.0) ** len(nmp)
    Nm = lead * (np.real_if_close(np.poly(lhp), tol=1e6).real if len(lhp) else np.array([1.0]))
    Dm = np.array(tf.den)
    # unit static gain for g+ (Np(0) == Dp(0) analytically)
    Np = Np * (Dp[-1] / Np[-1])
    return Np, Dp, Nm, Dm, np.asarray(pd, dtype=float)


def imc_controller(tf: RationalTF, epsilon: float, pade_order: int = DEFAULT_PADE_ORDER) -> IMCController:
    """IMC feedback controller ``f g-^-1 / (1 - f g+)`` for a given filter constant."""
    if not tf.is_stable():
        raise TuningError("IMC design requires a stable model")
    if not epsilon > 0:
        raise TuningError("filter time constant must be positive")
    Np, Dp, Nm, Dm, pd = imc_factorize(tf, pade_order)
    num = np.polymul(Dm, pd)
    base = np.array([epsilon, 1.0])
    for q in range(0, len(Dm) + 1):
        F = np.array([1.0])
        for _ in range(q):
            F = np.polymul(F, base)
        # C = Dm pd / (Nm (F Dp - Np)); the static term of F Dp - Np is exactly zero
        S = np.polysub(np.polymul(F, Dp), Np)
        S[-1] = 0.0
        S = _trim(S)
        if S.size == 1 and S[0] == 0.0:
            continue
        den = np.polymul(Nm, S)
        if len(_trim(num)) <= len(den):
            C = RationalTF(num, den).minreal()
            _check_imc(C)
            g_minus = RationalTF(np.polymul(Nm, Dp), np.polymul(Dm, pd)).minreal()
            return IMCController(C, float(epsilon), q, RationalTF(Np, Dp), g_minus)
    raise TuningError("no filter order makes the IMC controller proper")


def _check_imc(C: RationalTF) -> None:
    poles = C.poles()
    at_origin = np.abs(poles) <= 1e-9 * max(1.0, float(np.max(np.abs(poles), initial=0.0)))
    bad = poles[~at_origin & (poles.real >= -STABILITY_TOL)]
    if bad.size or at_origin.sum() > 1:
        raise TuningError(f"IMC cancellation failure: controller poles {np.round(poles, 6).tolist()}")
    if not C.is_proper():
        raise TuningError("IMC controller is improper")


def imc_design(tf: RationalTF, eta: float, pade_order: int = DEFAULT_PADE_ORDER) -> IMCController:
    """IMC with ``epsilon = eta * Z`` (slowest RHP-zero time constant),
    or ``eta * T`` from the FOPDT fit when there are no RHP zeros."""
    if not eta > 0:
        raise TuningError("eta must be positive")
    if not tf.is_stable():
        raise TuningError("IMC design requires a stable model")
    zeros = tf.zeros()
    rhp = zeros[zeros.real > STABILITY_TOL]
    if rhp.size:
        Z = float(np.max(1.0 / rhp.real))
    else:
        Z = fit_fopdt(tf).T
    return imc_controller(tf, eta * Z, pade_order)


def pi_parameters(C: RationalTF) -> PIController:
    """Read ``(Kp, Ti)`` back from a controller of the form ``(b s + c) / (a s)``."""
    num, den = np.array(C.num), np.array(C.den)
    if len(den) != 2 or den[1] != 0.0 or len(num) > 2:
        raise TuningError("controller is not a PI controller")
    b, c = (num if len(num) == 2 else np.array([0.0, num[0]]))
    if c == 0.0:
        raise TuningError("controller has no integral action")
    return PIController(Kp=float(b / den[0]), Ti=float(b / c))


def design_controller(tf: RationalTF, method: str, eta: float, pade_order: int = DEFAULT_PADE_ORDER) -> RationalTF:
    """Loop controller transfer function for ``method`` in {"lambda", "imc"}."""
    if method == "lambda":
        return lambda_pi(fit_fopdt(tf), eta).as_tf()
    if method == "imc":
        return imc_design(tf, eta, pade_order).controller
    raise ValueError(f"unknown tuning method {method!r}")


__all__ = [
    "FOPDTModel", "PIController", "IMCController", "TuningError",
    "fit_fopdt", "lambda_pi", "imc_design", "imc_controller", "imc_factorize",
    "design_controller", "pi_parameters", "fopdt_objective", "fit_horizon", "LTIError",
]
