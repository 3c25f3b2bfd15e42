"""Random stable MIMO plants for benchmarking.

Every system is drawn from its own Philox stream keyed by
``(seed, system_id)``, so adding systems never reshuffles earlier ones.

Per entry: order and relative degree are uniform integers; pole time
constants and static-gain magnitudes are log-uniform; complex pole pairs
are drawn so their expected share of poles matches the configured
percentage; zeros are real with time constants in the pole range. Entries
whose normalized step response overshoots or undershoots past the limits
are redrawn with the same structure (order, pole types, zero counts,
delay presence) so screening does not bias those counts.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .lti import DEFAULT_PADE_ORDER, RationalTF, TransferMatrix, step_response

SCREEN_POINTS = 1500
SCREEN_ATTEMPTS = 200
MAX_ATTEMPTS = 2000


class GeneratorConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_inputs: int = 5
    n_outputs: int = 5
    min_inputs_per_output: int = 4
    max_inputs_per_output: int = 5
    min_tf_order: int = 1
    max_tf_order: int = 3
    min_relative_degree: int = 1
    max_relative_degree: int = 3
    max_static_gain: float = 100.0
    min_pole_time_constant: float = 1.0
    max_pole_time_constant: float = 10.0
    min_complex_damping: float = 0.1
    pct_complex_stable_poles: float = 20.0
    min_nmp_zeros: int = 0
    max_nmp_zeros: int = 4
    pct_delay: float = 10.0
    min_delay: float = 0.0
    max_delay: float = 0.5
    max_overshoot_pct: float = 10.0
    max_undershoot_pct: float = 25.0
    overshoot_tolerance: float = 0.01
    pade_order: int = DEFAULT_PADE_ORDER
    seed: int = 0

    def __post_init__(self):
        def need(cond, msg):
            if not cond:
                raise GeneratorConfigError(msg)

        need(self.n_inputs >= 1 and self.n_outputs >= 1, "plant dimensions must be positive")
        need(0 <= self.min_inputs_per_output <= self.max_inputs_per_output,
             "inputs per output: min must not exceed max")
        need(self.max_inputs_per_output >= 1, "each output needs at least one input")
        need(self.min_inputs_per_output <= self.n_inputs, "min inputs per output exceeds n_inputs")
        need(1 <= self.min_tf_order <= self.max_tf_order, "transfer function order range is invalid")
        need(0 <= self.min_relative_degree <= self.max_relative_degree,
             "relative degree range is invalid")
        need(self.min_relative_degree <= self.max_tf_order,
             "relative degree exceeds every admissible order")
        need(self.max_static_gain >= 1.0, "max_static_gain must be at least 1")
        need(0 < self.min_pole_time_constant <= self.max_pole_time_constant,
             "pole time constant range is invalid")
        need(0 < self.min_complex_damping <= 1, "min_complex_damping must lie in (0, 1]")
        need(0 <= self.pct_complex_stable_poles <= 100, "pct_complex_stable_poles must lie in [0, 100]")
        need(0 <= self.min_nmp_zeros <= self.max_nmp_zeros, "NMP zero range is invalid")
        need(0 <= self.pct_delay <= 100, "pct_delay must lie in [0, 100]")
        need(0 <= self.min_delay <= self.max_delay, "delay range is invalid")
        need(self.max_overshoot_pct >= 0 and self.max_undershoot_pct >= 0, "screening limits must be nonnegative")
        need(self.pade_order >= 1, "pade_order must be positive")
        need(self.seed >= 0, "seed must be nonnegative")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d) -> GeneratorConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise GeneratorConfigError(f"unknown generator settings: {sorted(unknown)}")
        return cls(**d)


def rng_for(seed: int, system_id: int) -> np.random.Generator:
    """Philox stream keyed by ``(seed, system_id)``."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(system_id)]))


def _uniform_int(rng, lo, hi) -> int:
    return int(lo) if lo == hi else int(rng.integers(lo, hi + 1))


def _log_uniform(rng, lo, hi) -> float:
    return float(lo) if lo == hi else float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


@dataclass(frozen=True)
class EntryStructure:
    order: int
    relative_degree: int
    complex_pairs: int
    n_nmp: int
    delayed: bool

    @property
    def n_zeros(self) -> int:
        return self.order - self.relative_degree


def draw_structure(rng, cfg: GeneratorConfig) -> EntryStructure:
    lo = max(cfg.min_tf_order, cfg.min_relative_degree)
    order = _uniform_int(rng, lo, cfg.max_tf_order)
    rd = _uniform_int(rng, cfg.min_relative_degree, min(cfg.max_relative_degree, order))
    x = cfg.pct_complex_stable_poles / 100.0 * order / 2.0
    pairs = int(math.floor(x)) + int(rng.random() < x - math.floor(x))
    pairs = min(pairs, order // 2)
    nz = order - rd
    n_nmp = _uniform_int(rng, min(cfg.min_nmp_zeros, nz), min(cfg.max_nmp_zeros, nz))
    delayed = bool(rng.random() < cfg.pct_delay / 100.0)
    return EntryStructure(order, rd, pairs, n_nmp, delayed)


def draw_poles(rng, cfg: GeneratorConfig, order: int, complex_pairs: int) -> tuple[list, list]:
    """``(real_taus, [(tau, zeta), ...])``; a complex pair's time constant is ``1/|p|``."""
    lo, hi = cfg.min_pole_time_constant, cfg.max_pole_time_constant
    cplx = [(_log_uniform(rng, lo, hi), float(rng.uniform(cfg.min_complex_damping, 1.0)))
            for _ in range(complex_pairs)]
    real = [_log_uniform(rng, lo, hi) for _ in range(order - 2 * complex_pairs)]
    return real, cplx


def draw_entry(rng, cfg: GeneratorConfig, st: EntryStructure) -> RationalTF:
    real, cplx = draw_poles(rng, cfg, st.order, st.complex_pairs)
    lo, hi = cfg.min_pole_time_constant, cfg.max_pole_time_constant
    ztaus = [_log_uniform(rng, lo, hi) for _ in range(st.n_zeros)]
    gain = _log_uniform(rng, 1.0, cfg.max_static_gain)
    sign = -1.0 if rng.random() < 0.5 else 1.0
    delay = float(rng.uniform(cfg.min_delay, cfg.max_delay)) if st.delayed else 0.0

    # time-constant form: unit static gain per factor
    num = np.array([sign * gain])
    for k, tz in enumerate(ztaus):
        num = np.polymul(num, [-tz if k < st.n_nmp else tz, 1.0])
    den = np.array([1.0])
    for tp in real:
        den = np.polymul(den, [tp, 1.0])
    for tp, zeta in cplx:
        den = np.polymul(den, [tp * tp, 2.0 * zeta * tp, 1.0])
    return RationalTF(num, den, delay)


def step_extremes(tf: RationalTF) -> tuple[float, float]:
    """``(overshoot, undershoot)`` of the step response normalized by its static gain."""
    horizon = tf.delay + 10.0 * float(np.max(1.0 / np.abs(tf.poles().real)))
    t = np.linspace(0.0, horizon, SCREEN_POINTS + 1)
    y = step_response(tf, t) / tf.dc_gain()
    return max(float(y.max()) - 1.0, 0.0), max(-float(y.min()), 0.0)


def passes_screen(tf: RationalTF, cfg: GeneratorConfig) -> bool:
    over, under = step_extremes(tf)
    return (over <= cfg.max_overshoot_pct / 100.0 + cfg.overshoot_tolerance
            and under <= cfg.max_undershoot_pct / 100.0 + cfg.overshoot_tolerance)


def generate_entry(rng, cfg: GeneratorConfig) -> RationalTF:
    for _ in range(MAX_ATTEMPTS // SCREEN_ATTEMPTS):
        st = draw_structure(rng, cfg)
        for _ in range(SCREEN_ATTEMPTS):
            tf = draw_entry(rng, cfg, st)
            if passes_screen(tf, cfg):
                return tf
    raise GeneratorConfigError("overshoot/undershoot limits reject every sampled entry")


def _has_perfect_matching(mask: np.ndarray) -> bool:
    n = min(mask.shape)
    rows, cols = linear_sum_assignment(-mask.astype(float))
    return int(mask[rows, cols].sum()) == n


def draw_sparsity(rng, cfg: GeneratorConfig) -> np.ndarray:
    """Boolean entry pattern with a structurally full-rank assignment."""
    p, m = cfg.n_outputs, cfg.n_inputs
    hi = min(cfg.max_inputs_per_output, m)
    lo = min(max(cfg.min_inputs_per_output, 1), hi)
    for _ in range(MAX_ATTEMPTS):
        mask = np.zeros((p, m), dtype=bool)
        for i in range(p):
            k = _uniform_int(rng, lo, hi)
            mask[i, rng.choice(m, size=k, replace=False)] = True
        if _has_perfect_matching(mask):
            return mask
    raise GeneratorConfigError("inputs-per-output limits never admit a full pairing")


def generate(cfg: GeneratorConfig, system_id: int = 0) -> TransferMatrix:
    """One plant; identical ``(cfg, system_id)`` give coefficient-identical results."""
    rng = rng_for(cfg.seed, system_id)
    mask = draw_sparsity(rng, cfg)
    rows = []
    for i in range(cfg.n_outputs):
        row = []
        for j in range(cfg.n_inputs):
            row.append(generate_entry(rng, cfg) if mask[i, j] else RationalTF())
        rows.append(row)
    return TransferMatrix(rows)


def generate_batch(cfg: GeneratorConfig, n_systems: int, start: int = 0) -> list[TransferMatrix]:
    return [generate(cfg, k) for k in range(start, start + n_systems)]
