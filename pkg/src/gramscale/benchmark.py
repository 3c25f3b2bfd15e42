"""Batch evaluation of interaction measures and scalings on generated plants.

For every system, each (measure, scaling) IM is paired (optionally under
the Niederlinski filter), optionally augmented with sparse feedforward,
and each resulting configuration is tuned and simulated. Scores
``c_min / c`` are pooled per (system, tuning method, test kind) over all
evaluated configurations.

Per-system results are cached as JSON under ``<out>/systems`` so an
interrupted run resumes where it stopped. The report CSV and summary JSON
are pure functions of the manifest settings.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .generator import GeneratorConfig, generate
from .interaction import GRAMIAN_MEASURES, Measure, Scaling, build_im
from .lti import LTIError, dc_gain
from .pairing import PairingError, max_assignment, pair_with_ni, sparse_structure
from .scaling import SK_TOL, ScalingError, apply_scaling
from .simulate import SimulationConfig, evaluate_configuration, paired_t_test, score_methods

CONTROL_KINDS = ("decentralized", "sparse")
METHODS = ("lambda", "imc")
TEST_KINDS = ("reference", "disturbance", "total")
ALL_SCALINGS = (Scaling.NONE, Scaling.COLUMN, Scaling.ROW, Scaling.ROW_OR_COLUMN, Scaling.SINKHORN_KNOPP)

CSV_FIELDS = (
    "system_id", "measure", "scaling", "control_kind", "method", "pairing", "feedforward",
    "ni", "best_eta", "cost_ref", "cost_dist", "cost", "score_ref", "score_dist", "score",
    "flagged", "error",
)


class BenchmarkConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    n_systems: int = 10
    measures: tuple = GRAMIAN_MEASURES
    scalings: tuple = ALL_SCALINGS
    control_kinds: tuple = CONTROL_KINDS
    methods: tuple = METHODS
    rho: float = 3.0
    sparse_threshold: float = 0.7
    ni: bool = True
    sk_tol: float = SK_TOL
    first_system: int = 0

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(Measure.parse(m) for m in self.measures))
        object.__setattr__(self, "scalings", tuple(Scaling.parse(s) for s in self.scalings))
        object.__setattr__(self, "control_kinds", tuple(self.control_kinds))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.n_systems < 1:
            raise BenchmarkConfigError("n_systems must be at least 1")
        if not self.measures or Measure.RGA in self.measures:
            raise BenchmarkConfigError("measures must be a nonempty list of PM, HIIA, SIGMA2")
        if not self.scalings:
            raise BenchmarkConfigError("scalings must not be empty")
        if not self.control_kinds or set(self.control_kinds) - set(CONTROL_KINDS):
            raise BenchmarkConfigError(f"control_kinds must be drawn from {CONTROL_KINDS}")
        if not self.methods or set(self.methods) - set(METHODS):
            raise BenchmarkConfigError(f"methods must be drawn from {METHODS}")
        if self.rho < 0:
            raise BenchmarkConfigError("rho must be nonnegative")
        if not self.sk_tol > 0:
            raise BenchmarkConfigError("sk_tol must be positive")

    @property
    def pade_order(self) -> int:
        return self.generator.pade_order

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "simulation": self.simulation.to_dict(),
            "n_systems": self.n_systems,
            "first_system": self.first_system,
            "measures": [m.value for m in self.measures],
            "scalings": [s.value for s in self.scalings],
            "control_kinds": list(self.control_kinds),
            "methods": list(self.methods),
            "rho": self.rho,
            "sparse_threshold": self.sparse_threshold,
            "ni": self.ni,
            "sk_tol": self.sk_tol,
        }

    @classmethod
    def from_dict(cls, d) -> BenchmarkConfig:
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise BenchmarkConfigError(f"unknown benchmark settings: {sorted(unknown)}")
        try:
            if "generator" in d:
                d["generator"] = GeneratorConfig.from_dict(d["generator"])
            if "simulation" in d:
                d["simulation"] = SimulationConfig.from_dict(d["simulation"])
        except (TypeError, ValueError) as exc:
            raise BenchmarkConfigError(str(exc)) from exc
        return cls(**d)


# -- per-system work ---------------------------------------------------------

def _fmt_pairing(assignment) -> str:
    return "-".join(str(j) for j in assignment)


def _fmt_ff(edges) -> str:
    return ";".join(f"{a}>{b}" for a, b in edges)


def _decisions(G, cfg: BenchmarkConfig):
    """``{(measure, scaling, kind): decision or error string}``."""
    G0 = dc_gain(G)
    out = {}
    for measure in cfg.measures:
        try:
            base = build_im(G, measure, cfg.pade_order)
        except (LTIError, ValueError) as exc:
            for sc in cfg.scalings:
                for kind in cfg.control_kinds:
                    out[measure, sc, kind] = f"IM failed: {exc}"
            continue
        for sc in cfg.scalings:
            try:
                im = apply_scaling(base, sc, sk_tol=cfg.sk_tol)
                dec = pair_with_ni(im, G0) if cfg.ni else max_assignment(im)
            except (ScalingError, PairingError) as exc:
                for kind in cfg.control_kinds:
                    out[measure, sc, kind] = str(exc)
                continue
            for kind in cfg.control_kinds:
                if kind == "sparse":
                    out[measure, sc, kind] = sparse_structure(im, dec, cfg.rho, G, cfg.sparse_threshold)
                else:
                    out[measure, sc, kind] = dec
    return out


def evaluate_system(cfg: BenchmarkConfig, system_id: int) -> dict:
    """All report rows for one generated plant, as a JSON-ready dict."""
    try:
        G = generate(cfg.generator, system_id)
        decisions = _decisions(G, cfg)
    except Exception as exc:  # keep the batch alive; the failure lands in the report
        return {"system_id": system_id, "error": f"{type(exc).__name__}: {exc}", "rows": []}

    cache = {}
    rows = []
    for (measure, sc, kind), dec in decisions.items():
        for method in cfg.methods:
            row = {
                "system_id": system_id, "measure": measure.value, "scaling": sc.value,
                "control_kind": kind, "method": method, "pairing": "", "feedforward": "",
                "ni": None, "best_eta": None, "cost_ref": math.inf, "cost_dist": math.inf,
                "cost": math.inf, "flagged": 0, "error": "",
            }
            if isinstance(dec, str):
                row["error"] = dec
                rows.append(row)
                continue
            row["pairing"] = _fmt_pairing(dec.assignment)
            row["feedforward"] = _fmt_ff(dec.feedforward)
            row["ni"] = dec.ni
            key = (dec.assignment, dec.feedforward, method)
            if key not in cache:
                cache[key] = evaluate_configuration(G, dec, method, cfg.simulation, cfg.pade_order)
            res = cache[key]
            row.update(best_eta=None if math.isnan(res.best_eta) else res.best_eta,
                       cost_ref=res.cost_ref, cost_dist=res.cost_dist, cost=res.cost,
                       flagged=res.flagged, error="; ".join(res.errors[:1]))
            rows.append(row)

    for method in cfg.methods:
        mine = [r for r in rows if r["method"] == method]
        for col, out in (("cost_ref", "score_ref"), ("cost_dist", "score_dist"), ("cost", "score")):
            scores = score_methods({k: r[col] for k, r in enumerate(mine)})
            for k, r in enumerate(mine):
                r[out] = scores[k]
    return {"system_id": system_id, "error": "", "rows": rows}


# -- serialization -------------------------------------------------------------

def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def _to_jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x == math.inf else ("-inf" if x == -math.inf else "nan")
    if isinstance(x, dict):
        return {k: _to_jsonable(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_to_jsonable(v) for v in x]
    return x


def _from_jsonable(x):
    if x in ("inf", "-inf", "nan"):
        return float(x)
    if isinstance(x, dict):
        return {k: (v if k in ("error", "pairing", "feedforward", "measure", "scaling",
                                 "control_kind", "method") else _from_jsonable(v))
                for k, v in x.items()}
    if isinstance(x, list):
        return [_from_jsonable(v) for v in x]
    return x


def report_csv(results: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for res in results:
        if res["error"] and not res["rows"]:
            w.writerow([res["system_id"]] + [""] * (len(CSV_FIELDS) - 2) + [res["error"]])
            continue
        for r in res["rows"]:
            w.writerow([_num(r.get(f)) if f != "error" else r["error"] for f in CSV_FIELDS])
    return buf.getvalue()


def summarize(results: list[dict], cfg: BenchmarkConfig) -> dict:
    """Mean scores and paired t-tests (scaled vs unscaled), by test kind,
    tuning method, measure, control kind and scaling."""
    ok = [r for r in results if r["rows"]]
    table = {}
    score_col = {"reference": "score_ref", "disturbance": "score_dist", "total": "score"}
    for test in TEST_KINDS:
        col = score_col[test]
        tmeth = {}
        for method in cfg.methods:
            tmeas = {}
            for measure in cfg.measures:
                tkind = {}
                for kind in cfg.control_kinds:
                    per = {}
                    for sc in cfg.scalings:
                        vals = []
                        for res in ok:
                            for r in res["rows"]:
                                if (r["method"], r["measure"], r["control_kind"], r["scaling"]) == \
                                        (method, measure.value, kind, sc.value):
                                    vals.append(r[col])
                        per[sc.value] = vals
                    tsc = {}
                    base = per.get(Scaling.NONE.value)
                    for sc in cfg.scalings:
                        vals = per[sc.value]
                        entry = {"mean": float(np.mean(vals)) if vals else None, "n": len(vals)}
                        if sc is not Scaling.NONE and base is not None and len(vals) >= 2:
                            try:
                                entry["t_test"] = paired_t_test(vals, base).to_dict()
                            except ValueError as exc:
                                entry["t_test"] = {"error": str(exc)}
                        tsc[sc.value] = entry
                    tkind[kind] = tsc
                tmeas[measure.value] = tkind
            tmeth[method] = tmeas
        table[test] = tmeth
    return {
        "n_systems": len(results),
        "n_failed": len(results) - len(ok),
        "scores": table,
    }


# -- driver -------------------------------------------------------------------

def _system_path(out: Path, system_id: int) -> Path:
    return out / "systems" / f"system_{system_id + 1:04d}.json"


def _worker(args):
    cfg_dict, system_id = args
    return evaluate_system(BenchmarkConfig.from_dict(cfg_dict), system_id)


def run_benchmark(cfg: BenchmarkConfig, out_dir, jobs: int = 1, command: str = "benchmark",
                  progress=None) -> dict:
    """Evaluate ``cfg.n_systems`` plants and write ``report.csv``, ``summary.json``
    and ``manifest.json`` into ``out_dir``. Returns the summary."""
    out = Path(out_dir)
    (out / "systems").mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    snapshot = cfg.to_dict()
    if manifest_path.exists():
        old = json.loads(manifest_path.read_text())
        if old.get("config") != json.loads(json.dumps(snapshot)):
            raise BenchmarkConfigError(
                f"{out} holds results for a different configuration; use a fresh directory")
    t0 = time.time()
    ids = list(range(cfg.first_system, cfg.first_system + cfg.n_systems))
    results: dict[int, dict] = {}
    todo = []
    for sid in ids:
        path = _system_path(out, sid)
        if path.exists():
            results[sid] = _from_jsonable(json.loads(path.read_text()))
        else:
            todo.append(sid)

    def store(res):
        _system_path(out, res["system_id"]).write_text(json.dumps(_to_jsonable(res), indent=1) + "\n")
        results[res["system_id"]] = res
        if progress is not None:
            progress(res["system_id"])

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_worker, [(snapshot, sid) for sid in todo]):
                store(res)
    else:
        for sid in todo:
            store(evaluate_system(cfg, sid))

    ordered = [results[sid] for sid in ids]
    (out / "report.csv").write_text(report_csv(ordered))
    summary = summarize(ordered, cfg)
    (out / "summary.json").write_text(json.dumps(_to_jsonable(summary), indent=1, sort_keys=True) + "\n")
    manifest = {
        "command": command,
        "config": snapshot,
        "seed": cfg.generator.seed,
        "tool_version": __version__,
        "outputs": ["report.csv", "summary.json", "systems/"],
        "output_dir": str(out),
        "wall_time_s": round(time.time() - t0, 3),
        "resumed_systems": len(ids) - len(todo),
    }
    manifest_path.write_text(json.dumps(manifest, indent=1) + "\n")
    return summary


def rerun_row_source(manifest_path, system_id: int) -> dict:
    """Recompute one system's rows from a manifest (for spot checks)."""
    manifest = json.loads(Path(manifest_path).read_text())
    return evaluate_system(BenchmarkConfig.from_dict(manifest["config"]), system_id)
