"""Closed-loop assembly, step simulation, eta sweeps and scoring.

The loop is a single LTI state-space model with inputs ``[r (p), d (m)]``
(references, then input-side load disturbances) and outputs ``y``. Plant
delays enter through their Padé approximants.

Two cost engines are available. ``"step"`` runs the exact ZOH recurrence
through the compiled kernel. ``"closed"`` evaluates the same trapezoid sum
in closed form with a discrete Lyapunov solve, which is much faster for
long horizons; a coarse kernel scan still enforces the divergence
threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg, stats

from ._kernels import lti_scan, lti_step_response
from .lti import (
    DEFAULT_PADE_ORDER,
    LTIError,
    RationalTF,
    StateSpaceModel,
    TransferMatrix,
    dc_gain,
    realize,
    zoh,
)
from .pairing import PairingDecision, feedforward_block
from .tuning import TuningError, design_controller

DEFAULT_HORIZON = 2000.0
DEFAULT_ETA_GRID = tuple(float(x) for x in np.logspace(-1, 1, 25))
DT_PER_TIME_CONSTANT = 20
DT_MIN_STEPS = 2_000
DT_MAX_STEPS = 200_000
THRESHOLD_FACTOR = 1e3
ENGINES = ("closed", "step")


class AlgebraicLoopError(LTIError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    horizon: float = DEFAULT_HORIZON
    dt: float | None = None  # None: chosen from the closed-loop poles
    reference_amplitude: float = 1.0
    disturbance_amplitude: float = 1.0
    eta_grid: tuple = DEFAULT_ETA_GRID
    instability_threshold: float | None = None  # None: scaled from amplitudes and plant gain
    engine: str = "closed"
    scan_points: int = 400

    def __post_init__(self):
        object.__setattr__(self, "eta_grid", tuple(float(e) for e in self.eta_grid))
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.dt is not None and not 0 < self.dt < self.horizon:
            raise ValueError("dt must lie in (0, horizon)")
        if not self.eta_grid:
            raise ValueError("eta_grid must not be empty")
        if any(e <= 0 for e in self.eta_grid):
            raise ValueError("eta_grid values must be positive")
        if any(b <= a for a, b in zip(self.eta_grid, self.eta_grid[1:])):
            raise ValueError("eta_grid must be strictly ascending")
        if self.instability_threshold is not None and not self.instability_threshold > 0:
            raise ValueError("instability_threshold must be positive")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.scan_points < 2:
            raise ValueError("scan_points must be at least 2")

    def threshold_for(self, G0) -> float:
        if self.instability_threshold is not None:
            return float(self.instability_threshold)
        gain = float(np.abs(np.asarray(G0, dtype=float)).sum(axis=1).max()) if np.size(G0) else 0.0
        return THRESHOLD_FACTOR * max(abs(self.reference_amplitude),
                                      abs(self.disturbance_amplitude) * gain)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "dt": self.dt,
            "reference_amplitude": self.reference_amplitude,
            "disturbance_amplitude": self.disturbance_amplitude,
            "eta_grid": list(self.eta_grid),
            "instability_threshold": self.instability_threshold,
            "engine": self.engine,
            "scan_points": self.scan_points,
        }

    @classmethod
    def from_dict(cls, d) -> SimulationConfig:
        d = dict(d)
        if "eta_grid" in d:
            d["eta_grid"] = tuple(d["eta_grid"])
        return cls(**d)


# -- loop assembly ---------------------------------------------------------

def _block_diag_ss(blocks: Sequence[StateSpaceModel]):
    n = sum(b.n_states for b in blocks)
    k = len(blocks)
    A = np.zeros((n, n))
    B = np.zeros((n, k))
    C = np.zeros((k, n))
    D = np.zeros((k, k))
    o = 0
    for idx, b in enumerate(blocks):
        s = b.n_states
        A[o:o + s, o:o + s] = b.A
        B[o:o + s, idx] = b.B[:, 0]
        C[idx, o:o + s] = b.C[0]
        D[idx, idx] = b.D[0, 0]
        o += s
    return A, B, C, D


def _check_edge_cycles(edges, ff_direct: dict) -> None:
    """Reject cycles made only of feedforward blocks with direct feedthrough."""
    graph: dict[int, list] = {}
    for (src, dst), direct in ff_direct.items():
        if direct:
            graph.setdefault(src, []).append(dst)
    state: dict[int, int] = {}

    def visit(u):
        state[u] = 1
        for v in graph.get(u, ()):
            if state.get(v) == 1:
                raise AlgebraicLoopError("algebraic loop among feedforward edges")
            if v not in state:
                visit(v)
        state[u] = 2

    for u in list(graph):
        if u not in state:
            visit(u)


def build_closed_loop(G: TransferMatrix, decision: PairingDecision, controllers: Sequence[RationalTF],
                      pade_order: int = DEFAULT_PADE_ORDER) -> StateSpaceModel:
    """State-space model of the paired loop, inputs ``[r, d]`` and outputs ``y``.

    Loop ``i`` drives input ``sigma(i)`` with ``v = C_i (r_i - y_i)`` minus,
    for each feedforward edge ``(j -> i)``, ``g[i, j] / g[i, sigma(i)]``
    applied to the commanded input ``v_j``. The plant sees ``u = v + d``.
    """
    p, m = G.shape
    sigma = list(decision.assignment)
    if p != m or len(sigma) != p:
        raise LTIError("closed loop needs a square plant and a full pairing")
    if len(controllers) != p:
        raise LTIError(f"expected {p} loop controllers, got {len(controllers)}")
    owner = {sigma[i]: i for i in range(p)}  # input -> loop

    blocks, kinds = [], []
    plant_idx = {}
    for i, j, g in G.items():
        if g.is_zero:
            continue
        plant_idx[i, j] = len(blocks)
        blocks.append(realize(g, pade_order))
        kinds.append(("g", i, j))
    ctrl_idx = []
    for i, c in enumerate(controllers):
        if not c.is_proper():
            raise LTIError(f"controller for loop {i} is improper")
        ctrl_idx.append(len(blocks))
        blocks.append(realize(c, pade_order))
        kinds.append(("c", i))
    ff_idx = {}
    ff_direct = {}
    for src, loop in decision.feedforward:
        blk = feedforward_block(G, sigma, src, loop)
        if not blk.is_proper() or not blk.is_causal:
            raise LTIError(f"feedforward block ({src}->{loop}) is not realizable")
        ss = realize(blk, pade_order)
        ff_idx[src, loop] = len(blocks)
        ff_direct[src, sigma[loop]] = bool(ss.D[0, 0] != 0.0)
        blocks.append(ss)
        kinds.append(("f", src, loop))
    _check_edge_cycles(decision.feedforward, ff_direct)

    A, B, C, D = _block_diag_ss(blocks)
    k = len(blocks)
    # block inputs w = M z + N [r; d]
    M = np.zeros((k, k))
    N = np.zeros((k, p + m))

    def add_commanded(row, j):
        """Add ``v_j`` (commanded input j) into block-input ``row``."""
        loop = owner[j]
        M[row, ctrl_idx[loop]] += 1.0
        for (src, tgt), b in ff_idx.items():
            if tgt == loop:
                M[row, b] -= 1.0

    for b, kind in enumerate(kinds):
        if kind[0] == "g":
            _, i, j = kind
            add_commanded(b, j)
            N[b, p + j] = 1.0
        elif kind[0] == "c":
            i = kind[1]
            N[b, i] = 1.0
            for (ii, j), gb in plant_idx.items():
                if ii == i:
                    M[b, gb] -= 1.0
        else:
            _, src, loop = kind
            add_commanded(b, src)
    Y = np.zeros((p, k))
    for (i, j), gb in plant_idx.items():
        Y[i, gb] = 1.0

    IDM = np.eye(k) - D @ M
    if np.linalg.cond(IDM) > 1e12:
        raise AlgebraicLoopError("closed loop is not well posed (algebraic loop)")
    Zx = np.linalg.solve(IDM, C)
    Zw = np.linalg.solve(IDM, D @ N)
    Acl = A + B @ M @ Zx
    Bcl = B @ (N + M @ Zw)
    return StateSpaceModel(Acl, Bcl, Y @ Zx, Y @ Zw)


# -- simulation ------------------------------------------------------------

def choose_dt(sys: StateSpaceModel, cfg: SimulationConfig) -> float:
    """``(fastest closed-loop time constant) / 20`` clamped to the step-count window,
    then shrunk so the grid ends exactly at the horizon."""
    H = cfg.horizon
    if cfg.dt is not None:
        dt = cfg.dt
    else:
        poles = sys.poles()
        fastest = float(np.max(np.abs(poles))) if poles.size else 0.0
        dt = (1.0 / fastest) / DT_PER_TIME_CONSTANT if fastest > 0 else H / DT_MIN_STEPS
        dt = min(max(dt, H / DT_MAX_STEPS), H / DT_MIN_STEPS)
    n = max(1, int(math.ceil(H / dt - 1e-9)))
    return H / n


@dataclass(frozen=True)
class StepResult:
    cost: float
    eigen_stable: bool
    exceeded: bool
    flagged: bool
    dt: float


def _channel(sys: StateSpaceModel, channel: int, kind: str, cfg: SimulationConfig):
    p = sys.n_outputs
    r = np.zeros(p)
    if kind == "reference":
        if not 0 <= channel < p:
            raise IndexError(f"reference channel {channel} out of range")
        col, amp = channel, cfg.reference_amplitude
        r[channel] = amp
    elif kind == "disturbance":
        m = sys.n_inputs - p
        if not 0 <= channel < m:
            raise IndexError(f"disturbance channel {channel} out of range")
        col, amp = p + channel, cfg.disturbance_amplitude
    else:
        raise ValueError("kind must be 'reference' or 'disturbance'")
    return col, amp, r


class LoopSimulator:
    """Discretized loop shared across all step channels of one configuration."""

    def __init__(self, sys: StateSpaceModel, cfg: SimulationConfig, threshold: float):
        self.sys = sys
        self.cfg = cfg
        self.threshold = float(threshold)
        self.dt = choose_dt(sys, cfg)
        self.nsteps = int(round(cfg.horizon / self.dt))
        poles = sys.poles()
        self.eigen_stable = bool(np.all(poles.real < 0)) if poles.size else True
        self._Ad = self._Bd = None
        self._closed = None
        self._scan = None

    def _discretize(self):
        if self._Ad is None:
            Ad, Bd = zoh(self.sys.A, self.sys.B, self.dt)
            self._Ad, self._Bd = np.ascontiguousarray(Ad), np.ascontiguousarray(Bd)
        return self._Ad, self._Bd

    def _closed_parts(self):
        if self._closed is None:
            Ad, _ = self._discretize()
            n = Ad.shape[0]
            C = self.sys.C
            AdN = np.linalg.matrix_power(Ad, self.nsteps)
            X = linalg.solve_discrete_lyapunov(Ad.T, C.T @ C)
            X = (X + X.T) / 2
            lu = linalg.lu_factor(np.eye(n) - Ad)
            self._closed = (AdN, Ad @ AdN, X, lu)
        return self._closed

    def _scan_exceeded(self, col: int, amp: float, r: np.ndarray) -> bool:
        if self._scan is None:
            pts = min(self.cfg.scan_points, self.nsteps)
            Ads, Bds = zoh(self.sys.A, self.sys.B, self.cfg.horizon / pts)
            self._scan = (np.ascontiguousarray(Ads), np.ascontiguousarray(Bds), pts)
        Ads, Bds, pts = self._scan
        _, _, at = lti_scan(
            Ads, np.ascontiguousarray(Bds[:, col] * amp), np.ascontiguousarray(self.sys.C),
            np.ascontiguousarray(self.sys.D[:, col] * amp), r, pts, self.threshold,
        )
        return at >= 0

    def _cost_step(self, col, amp, r):
        Ad, Bd = self._discretize()
        s, _, at = lti_scan(
            Ad, np.ascontiguousarray(Bd[:, col] * amp), np.ascontiguousarray(self.sys.C),
            np.ascontiguousarray(self.sys.D[:, col] * amp), r, self.nsteps, self.threshold,
        )
        return (math.inf if at >= 0 else s * self.dt), at >= 0

    def _cost_closed(self, col, amp, r):
        exceeded = self._scan_exceeded(col, amp, r)
        if not self.eigen_stable:
            return math.inf, exceeded
        du = self.sys.D[:, col] * amp
        if self.sys.n_states == 0:
            e = r - du
            return float(e @ e) * self.cfg.horizon, exceeded
        _, Bd = self._discretize()
        AdN, AdN1, X, lu = self._closed_parts()
        C = self.sys.C
        bu = Bd[:, col] * amp
        xs = linalg.lu_solve(lu, bu)
        a = r - C @ xs - du
        w = AdN1 @ xs
        s1 = linalg.lu_solve(lu, xs - w)
        total = (self.nsteps + 1) * float(a @ a) + 2.0 * float(a @ (C @ s1))
        total += float(xs @ X @ xs) - float(w @ X @ w)
        e0 = r - du
        eN = a + C @ (AdN @ xs)
        total -= 0.5 * (float(e0 @ e0) + float(eN @ eN))
        cost = max(total, 0.0) * self.dt
        if exceeded or not math.isfinite(cost):
            return math.inf, exceeded
        return cost, exceeded

    def run(self, channel: int, kind: str) -> StepResult:
        col, amp, r = _channel(self.sys, channel, kind, self.cfg)
        r = np.ascontiguousarray(r)
        if self.cfg.engine == "step":
            cost, exceeded = self._cost_step(col, amp, r)
        else:
            cost, exceeded = self._cost_closed(col, amp, r)
        if not self.eigen_stable:
            cost = math.inf
        flagged = self.eigen_stable == exceeded
        return StepResult(cost, self.eigen_stable, exceeded, flagged, self.dt)


def _default_threshold(sys: StateSpaceModel, cfg: SimulationConfig) -> float:
    if cfg.instability_threshold is not None:
        return cfg.instability_threshold
    p = sys.n_outputs
    try:
        G0 = sys.C @ np.linalg.solve(-sys.A, sys.B[:, p:]) + sys.D[:, p:] if sys.n_states else sys.D[:, p:]
    except np.linalg.LinAlgError:
        G0 = np.zeros((p, sys.n_inputs - p))
    return cfg.threshold_for(G0)


def simulate_step_detailed(sys: StateSpaceModel, channel: int, kind: str,
                           cfg: SimulationConfig | None = None, threshold: float | None = None) -> StepResult:
    cfg = cfg or SimulationConfig()
    thr = threshold if threshold is not None else _default_threshold(sys, cfg)
    return LoopSimulator(sys, cfg, thr).run(channel, kind)


def simulate_step(sys: StateSpaceModel, channel: int, kind: str,
                  cfg: SimulationConfig | None = None, threshold: float | None = None) -> float:
    """Trapezoid ``sum_i int (r_i - y_i)^2 dt`` for one step; ``inf`` if unstable.

    ``threshold`` defaults to the config's divergence bound; with no plant
    at hand the loop's own disturbance gain stands in for ``G(0)``.
    """
    return simulate_step_detailed(sys, channel, kind, cfg, threshold).cost


def simulate_outputs(sys: StateSpaceModel, channel: int, kind: str,
                     cfg: SimulationConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sampled output trajectories ``(t, Y)`` (``Y`` is steps x outputs) for one step."""
    cfg = cfg or SimulationConfig()
    col, amp, _ = _channel(sys, channel, kind, cfg)
    dt = choose_dt(sys, cfg)
    n = int(round(cfg.horizon / dt))
    t = np.linspace(0.0, cfg.horizon, n + 1)
    Ad, Bd = zoh(sys.A, sys.B, dt)
    Y = np.empty((n + 1, sys.n_outputs))
    for o in range(sys.n_outputs):
        Y[:, o] = lti_step_response(
            np.ascontiguousarray(Ad), np.ascontiguousarray(Bd[:, col] * amp),
            np.ascontiguousarray(sys.C[o]), float(sys.D[o, col] * amp), n, np.zeros(sys.n_states),
        )
    return t, Y


# -- configuration sweep ---------------------------------------------------

@dataclass(frozen=True)
class EvaluationResult:
    eta_grid: tuple
    cost_ref_by_eta: tuple
    cost_dist_by_eta: tuple
    best_eta: float
    cost: float
    cost_ref: float
    cost_dist: float
    flagged: int = 0
    errors: tuple = field(default=())

    @property
    def stable(self) -> bool:
        return math.isfinite(self.cost)


def loop_controllers(G: TransferMatrix, decision: PairingDecision, method: str, eta: float,
                     pade_order: int = DEFAULT_PADE_ORDER) -> list:
    """Per-loop SISO designs on the paired subsystems ``g[i, sigma(i)]``."""
    return [design_controller(G[i, j], method, eta, pade_order) for i, j in decision.pairs]


def evaluate_configuration(G: TransferMatrix, decision: PairingDecision, method: str,
                           cfg: SimulationConfig | None = None,
                           pade_order: int = DEFAULT_PADE_ORDER) -> EvaluationResult:
    """Sweep ``eta``; at each value sum unit-step costs over every reference
    channel and every input disturbance channel.

    ``cost_ref`` and ``cost_dist`` are minimized over eta independently;
    ``cost`` and ``best_eta`` come from the summed total.
    """
    cfg = cfg or SimulationConfig()
    threshold = cfg.threshold_for(dc_gain(G))
    p, m = G.shape
    refs, dists, errors = [], [], []
    flagged = 0
    for eta in cfg.eta_grid:
        try:
            ctrls = loop_controllers(G, decision, method, eta, pade_order)
            sys = build_closed_loop(G, decision, ctrls, pade_order)
        except (TuningError, LTIError) as exc:
            refs.append(math.inf)
            dists.append(math.inf)
            errors.append(f"eta={eta:.6g}: {exc}")
            continue
        sim = LoopSimulator(sys, cfg, threshold)
        cr = cd = 0.0
        for i in range(p):
            res = sim.run(i, "reference")
            flagged += res.flagged
            cr += res.cost
        for j in range(m):
            res = sim.run(j, "disturbance")
            flagged += res.flagged
            cd += res.cost
        refs.append(cr)
        dists.append(cd)
    totals = [a + b for a, b in zip(refs, dists)]
    k = int(np.argmin(totals))
    return EvaluationResult(
        cfg.eta_grid, tuple(refs), tuple(dists),
        best_eta=cfg.eta_grid[k] if math.isfinite(totals[k]) else math.nan,
        cost=totals[k], cost_ref=min(refs), cost_dist=min(dists),
        flagged=flagged, errors=tuple(errors),
    )


# -- scoring ---------------------------------------------------------------

def score_methods(costs: Mapping) -> dict:
    """``S = c_min / c``; infinite cost scores 0."""
    finite = [c for c in costs.values() if math.isfinite(c)]
    if not finite:
        return {k: 0.0 for k in costs}
    cmin = min(finite)
    out = {}
    for k, c in costs.items():
        if not math.isfinite(c):
            out[k] = 0.0
        elif c == 0.0:
            out[k] = 1.0
        else:
            out[k] = cmin / c
    return out


@dataclass(frozen=True)
class TTestResult:
    t: float
    p_one_sided: float
    significant_at_95: bool
    n: int
    mean_difference: float

    def to_dict(self) -> dict:
        return {"t": self.t, "p_one_sided": self.p_one_sided,
                "significant_at_95": self.significant_at_95, "n": self.n,
                "mean_difference": self.mean_difference}


def paired_t_test(scores_a, scores_b, alpha: float = 0.05) -> TTestResult:
    """One-sided paired t-test of ``mean(a - b) > 0``."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length 1-D sequences")
    n = a.size
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = math.fsum(d) / n
    sd = float(np.sqrt(math.fsum((d - mean) ** 2) / (n - 1)))
    if sd <= 1e-14 * max(1.0, abs(mean)):
        raise ValueError("zero-variance differences")
    t = mean / (sd / math.sqrt(n))
    p = float(stats.t.sf(t, n - 1))
    return TTestResult(float(t), p, bool(p < alpha), n, mean)
