"""Interaction matrices (PM, HIIA, Sigma2) and the RGA baseline."""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .gramian import norm_h2, norm_hankel, norm_hs_squared
from .lti import DEFAULT_PADE_ORDER, LTIError, TransferMatrix, dc_gain


class Measure(str, enum.Enum):
    PM = "PM"
    HIIA = "HIIA"
    SIGMA2 = "SIGMA2"
    RGA = "RGA"

    @classmethod
    def parse(cls, text) -> Measure:
        if isinstance(text, cls):
            return text
        key = str(text).strip().upper().replace("Σ", "SIGMA").replace("_", "")
        aliases = {"S2": "SIGMA2", "SIGMA": "SIGMA2"}
        return cls(aliases.get(key, key))


class Scaling(str, enum.Enum):
    NONE = "NONE"
    ROW = "ROW"
    COLUMN = "COLUMN"
    ROW_OR_COLUMN = "ROW_OR_COLUMN"
    SINKHORN_KNOPP = "SINKHORN_KNOPP"

    @classmethod
    def parse(cls, text) -> Scaling:
        if isinstance(text, cls):
            return text
        key = str(text).strip().upper().replace("-", "_").replace("/", "_OR_")
        aliases = {"SK": "SINKHORN_KNOPP", "ROWS": "ROW", "COLUMNS": "COLUMN",
                   "COL": "COLUMN", "ROW_COLUMN": "ROW_OR_COLUMN", "RC": "ROW_OR_COLUMN"}
        return cls(aliases.get(key, key))


GRAMIAN_MEASURES = (Measure.PM, Measure.HIIA, Measure.SIGMA2)


class DegeneratePlantError(LTIError):
    pass


class UnstableEntryError(LTIError):
    pass


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    values: np.ndarray
    measure: Measure | None = None
    scaling: Scaling = Scaling.NONE
    input_names: tuple = ()
    output_names: tuple = ()
    emphasis: tuple = field(default=())  # ((axis, index, factor), ...)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("interaction matrix must be 2-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("interaction matrix entries must be finite")
        v.setflags(write=False)
        p, m = v.shape
        ins = tuple(self.input_names) or tuple(f"u{j + 1}" for j in range(m))
        outs = tuple(self.output_names) or tuple(f"y{i + 1}" for i in range(p))
        if len(ins) != m or len(outs) != p:
            raise ValueError("label list lengths do not match the matrix")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measure", None if self.measure is None else Measure.parse(self.measure))
        object.__setattr__(self, "scaling", Scaling.parse(self.scaling))
        object.__setattr__(self, "input_names", ins)
        object.__setattr__(self, "output_names", outs)
        object.__setattr__(self, "emphasis", tuple(tuple(e) for e in self.emphasis))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values, **changes) -> InteractionMatrix:
        return replace(self, values=values, **changes)

    def permuted(self, row_order, col_order) -> InteractionMatrix:
        return replace(
            self,
            values=self.values[np.ix_(list(row_order), list(col_order))],
            input_names=[self.input_names[j] for j in col_order],
            output_names=[self.output_names[i] for i in row_order],
        )

    # -- CSV + JSON sidecar --------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.input_names))
        for name, row in zip(self.output_names, self.values):
            w.writerow([name] + [repr(float(x)) for x in row])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "measure": None if self.measure is None else self.measure.value,
            "scaling": self.scaling.value,
            "emphasis": [list(e) for e in self.emphasis],
        }

    def save(self, path) -> None:
        """Write ``path`` (CSV) and ``path`` with a ``.json`` suffix (tags)."""
        path = Path(path)
        path.write_text(self.to_csv())
        path.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=1) + "\n")

    @classmethod
    def from_csv(cls, text: str, **tags) -> InteractionMatrix:
        rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
        if len(rows) < 2:
            raise ValueError("IM CSV needs a header row and at least one data row")
        inputs = [c.strip() for c in rows[0][1:]]
        outputs, values = [], []
        for r in rows[1:]:
            if len(r) != len(inputs) + 1:
                raise ValueError(f"IM CSV row {r[0]!r} has {len(r) - 1} values, expected {len(inputs)}")
            outputs.append(r[0].strip())
            values.append([float(x) for x in r[1:]])
        return cls(np.array(values), input_names=inputs, output_names=outputs, **tags)

    @classmethod
    def load(cls, path) -> InteractionMatrix:
        path = Path(path)
        tags = {}
        side = path.with_suffix(".json")
        if side.exists():
            meta = json.loads(side.read_text())
            tags = {
                "measure": meta.get("measure"),
                "scaling": meta.get("scaling", "NONE"),
                "emphasis": meta.get("emphasis", ()),
            }
        return cls.from_csv(path.read_text(), **tags)


_NORMS = {
    Measure.PM: norm_hs_squared,
    Measure.HIIA: norm_hankel,
    Measure.SIGMA2: norm_h2,
}


def subsystem_norms(G: TransferMatrix, measure, pade_order: int = DEFAULT_PADE_ORDER) -> np.ndarray:
    """Unnormalized per-entry norms; identically-zero entries give exact 0."""
    measure = Measure.parse(measure)
    if measure not in _NORMS:
        raise ValueError(f"{measure.value} is not a gramian-based measure")
    norm = _NORMS[measure]
    out = np.zeros(G.shape)
    for i, j, g in G.items():
        if g.is_zero:
            continue
        if not g.is_stable():
            raise UnstableEntryError(
                f"unstable entry ({i},{j}) [{G.output_names[i]} <- {G.input_names[j]}]: "
                "gramian undefined"
            )
        out[i, j] = norm(g, pade_order)
    return out


def build_im(G: TransferMatrix, measure, pade_order: int = DEFAULT_PADE_ORDER) -> InteractionMatrix:
    """Gramian interaction matrix normalized to total sum 1."""
    measure = Measure.parse(measure)
    norms = subsystem_norms(G, measure, pade_order)
    total = norms.sum()
    if total <= 0.0:
        raise DegeneratePlantError("degenerate plant")
    return InteractionMatrix(norms / total, measure, Scaling.NONE, G.input_names, G.output_names)


def rga(G: TransferMatrix) -> InteractionMatrix:
    """Relative gain array ``G(0) .* inv(G(0))^T``."""
    G0 = dc_gain(G)
    if G0.shape[0] != G0.shape[1]:
        raise LTIError("RGA requires a square plant")
    return InteractionMatrix(rga_from_gain(G0), Measure.RGA, Scaling.NONE, G.input_names, G.output_names)


def rga_from_gain(G0) -> np.ndarray:
    G0 = np.asarray(G0, dtype=float)
    try:
        inv = np.linalg.inv(G0)
    except np.linalg.LinAlgError as exc:
        raise LTIError("singular steady-state gain, RGA undefined") from exc
    if np.linalg.cond(G0) > 1e14:
        raise LTIError("singular steady-state gain, RGA undefined")
    return G0 * inv.T
