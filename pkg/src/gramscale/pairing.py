"""Decentralized pairing and sparse feedforward selection from an IM.

Assignments map output index ``i`` to input index ``assignment[i]``. All
orderings are deterministic: equal totals are broken toward the
lexicographically smallest permutation.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .interaction import InteractionMatrix
from .lti import LTIError, TransferMatrix, divide

SPARSE_THRESHOLD = 0.7


class PairingError(ValueError):
    pass


class NoFeasiblePairingError(PairingError):
    pass


@dataclass(frozen=True)
class PairingDecision:
    assignment: tuple
    total_interaction: float
    ni: float | None = None
    feedforward: tuple = field(default=())  # ((source_input, target_loop), ...)
    rejected_candidates: int = 0

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(j) for j in self.assignment))
        object.__setattr__(self, "feedforward", tuple((int(a), int(b)) for a, b in self.feedforward))
        if sorted(self.assignment) != list(range(len(self.assignment))):
            raise PairingError(f"assignment {self.assignment} is not a permutation")
        for src, loop in self.feedforward:
            if src == self.assignment[loop]:
                raise PairingError(f"feedforward edge ({src},{loop}) feeds a loop its own input")

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(enumerate(self.assignment))

    def to_dict(self, output_names: Sequence[str] | None = None, input_names: Sequence[str] | None = None) -> dict:
        d = {
            "pairs": [[i, j] for i, j in self.pairs],
            "ni": self.ni,
            "feedforward": [[a, b] for a, b in self.feedforward],
            "total": self.total_interaction,
        }
        if output_names is not None and input_names is not None:
            d["labels"] = [[output_names[i], input_names[j]] for i, j in self.pairs]
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), indent=1)

    @classmethod
    def from_dict(cls, d) -> PairingDecision:
        pairs = sorted((int(i), int(j)) for i, j in d["pairs"])
        return cls(
            tuple(j for _, j in pairs),
            float(d.get("total", float("nan"))),
            d.get("ni"),
            tuple(tuple(e) for e in d.get("feedforward", ())),
        )


def _matrix(im) -> np.ndarray:
    v = im.values if isinstance(im, InteractionMatrix) else np.asarray(im, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise PairingError(f"pairing needs a square interaction matrix, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise PairingError("interaction matrix has non-finite entries")
    return v


def _total(M: np.ndarray, perm: Sequence[int]) -> float:
    return math.fsum(M[i, j] for i, j in enumerate(perm))


def _best(M: np.ndarray, allowed: np.ndarray):
    """Max-sum assignment restricted to ``allowed`` cells, or None."""
    cost = np.where(allowed, -M, np.inf)
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError:
        return None
    if len(rows) != M.shape[0] or not np.all(allowed[rows, cols]):
        return None
    perm = np.empty(M.shape[0], dtype=int)
    perm[rows] = cols
    return _total(M, perm), tuple(int(j) for j in perm)


def _fix(allowed: np.ndarray, i: int, j: int) -> np.ndarray:
    out = allowed.copy()
    out[i, :] = False
    out[:, j] = False
    out[i, j] = True
    return out


def _lex_best(M: np.ndarray, allowed: np.ndarray):
    """Optimal restricted assignment, lexicographically smallest among ties."""
    base = _best(M, allowed)
    if base is None:
        return None
    value, cur = base
    slack = 1e-12 * max(1.0, abs(value))
    for i in range(M.shape[0]):
        # the current optimum already certifies column cur[i]; only smaller ones need a solve
        for j in np.flatnonzero(allowed[i]):
            if j >= cur[i]:
                break
            trial = _fix(allowed, i, int(j))
            res = _best(M, trial)
            if res is not None and res[0] >= value - slack:
                allowed, cur = trial, res[1]
                break
        allowed = _fix(allowed, i, cur[i])
    perm = tuple(int(j) for j in cur)
    return _total(M, perm), perm


def max_assignment(im) -> PairingDecision:
    """Permutation maximizing the sum of selected IM elements."""
    M = _matrix(im)
    total, perm = _lex_best(M, np.ones(M.shape, dtype=bool))
    return PairingDecision(perm, total)


def iter_ranked_assignments(im) -> Iterator[tuple[tuple, float]]:
    """Yield ``(assignment, total)`` in non-increasing total order (Murty).

    Every cell of the partition is solved with the lexicographic tie rule,
    so the output order is exactly descending ``(total, -permutation)``.
    """
    M = _matrix(im)
    n = M.shape[0]
    root = np.ones((n, n), dtype=bool)
    first = _lex_best(M, root)
    heap = [(-first[0], first[1], root)]
    while heap:
        neg, perm, allowed = heapq.heappop(heap)
        yield perm, -neg
        cur = allowed
        for t in range(n):
            j = perm[t]
            if np.count_nonzero(cur[t]) > 1:
                sub = cur.copy()
                sub[t, j] = False
                res = _lex_best(M, sub)
                if res is not None:
                    heapq.heappush(heap, (-res[0], res[1], sub))
            cur = _fix(cur, t, j)


def ranked_assignments(im, k: int) -> list[PairingDecision]:
    """The ``k`` best assignments (fewer if ``k`` exceeds n!)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    out = []
    for perm, total in iter_ranked_assignments(im):
        out.append(PairingDecision(perm, total))
        if len(out) == k:
            break
    return out


def niederlinski_index(G0, assignment: Sequence[int]) -> float | None:
    """``det G0 / prod(diag)`` with the pairing on the diagonal; None if a paired gain is 0."""
    G0 = np.asarray(G0, dtype=float)
    Gp = G0[:, list(assignment)]
    diag = np.diag(Gp)
    if np.any(diag == 0.0):
        return None
    # log form: products of tiny or huge gains must not under/overflow
    sign, logdet = np.linalg.slogdet(Gp)
    if sign == 0.0:
        return 0.0
    sign *= np.prod(np.sign(diag))
    with np.errstate(over="ignore"):
        return float(sign * np.exp(logdet - np.sum(np.log(np.abs(diag)))))


def pair_with_ni(im, G0) -> PairingDecision:
    """Best-ranked pairing whose Niederlinski index is nonnegative."""
    M = _matrix(im)
    G0 = np.asarray(G0, dtype=float)
    if G0.shape != M.shape:
        raise PairingError(f"gain matrix shape {G0.shape} does not match IM shape {M.shape}")
    rejected = 0
    for perm, total in iter_ranked_assignments(M):
        ni = niederlinski_index(G0, perm)
        if ni is not None and ni >= 0.0:
            return PairingDecision(perm, total, ni=ni, rejected_candidates=rejected)
        rejected += 1
    raise NoFeasiblePairingError("no integral-stabilizable pairing")


def rga_pairing(rga_im) -> PairingDecision:
    """Pairing on RGA elements closest to one (maximize ``-|lambda - 1|``)."""
    L = _matrix(rga_im)
    dec = max_assignment(-np.abs(L - 1.0))
    return replace(dec, total_interaction=_total(L, dec.assignment))


def _reaches(edges: dict[int, set], start: int, goal: int) -> bool:
    stack, seen = [start], set()
    while stack:
        a = stack.pop()
        if a == goal:
            return True
        if a in seen:
            continue
        seen.add(a)
        stack.extend(edges.get(a, ()))
    return False


def feedforward_block(G: TransferMatrix, assignment: Sequence[int], source: int, loop: int):
    """``g[loop, source] / g[loop, assignment[loop]]`` (subtracted from the loop's input)."""
    return divide(G[loop, source], G[loop, assignment[loop]])


def sparse_scores(im, pairing: PairingDecision, rho: float) -> np.ndarray:
    """``gamma*`` in pairing-diagonal coordinates on the sum-1 IM; the diagonal is NaN."""
    M = _matrix(im)
    total = M.sum()
    if total <= 0:
        raise PairingError("interaction matrix must have a positive total")
    R = (M / total)[:, list(pairing.assignment)]
    penalty = R.sum(axis=0) - np.diag(R)
    gamma = R - rho * penalty[:, None]
    np.fill_diagonal(gamma, np.nan)
    return gamma


def sparse_structure(im, pairing: PairingDecision, rho: float, G: TransferMatrix | None = None,
                     threshold: float = SPARSE_THRESHOLD) -> PairingDecision:
    """Augment a decentralized pairing with decoupling feedforward edges.

    With the pairing on the diagonal, each off-diagonal candidate (i, j) is
    scored by ``v_ij - rho * sum_{k != i} v_ki`` on the IM rescaled to total
    sum 1. Positive candidates are taken best first while the summed IM
    elements (pairing plus chosen edges) do not exceed ``threshold``.
    A candidate is skipped if its block is unstable, improper or non-causal,
    or if it would close a cycle among feedforward edges. ``G=None`` skips
    the block checks.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    M = _matrix(im)
    total = M.sum()
    if total <= 0:
        raise PairingError("interaction matrix must have a positive total")
    V = M / total
    sigma = list(pairing.assignment)
    n = len(sigma)
    R = V[:, sigma]
    gamma = sparse_scores(V, pairing, rho)
    cumulative = math.fsum(np.diag(R))
    cands = sorted((-gamma[i, j], i, j) for i in range(n) for j in range(n)
                   if i != j and gamma[i, j] > 0)

    graph: dict[int, set] = {}
    edges = []
    for _, i, j in cands:
        if cumulative > threshold:
            break
        src, dst = sigma[j], sigma[i]
        if G is not None:
            try:
                block = feedforward_block(G, sigma, src, i)
            except LTIError:
                continue
            if not (block.is_causal and block.is_proper() and block.is_stable()):
                continue
        if _reaches(graph, dst, src):
            continue
        graph.setdefault(src, set()).add(dst)
        edges.append((src, i))
        cumulative += R[i, j]
    return replace(pairing, feedforward=tuple(edges))
