import csv
import io
import json
import math

import pytest

from gramscale.benchmark import (
    CSV_FIELDS,
    BenchmarkConfig,
    BenchmarkConfigError,
    evaluate_system,
    report_csv,
    rerun_row_source,
    run_benchmark,
)
from gramscale.generator import GeneratorConfig, generate
from gramscale.simulate import SimulationConfig, evaluate_configuration
from gramscale.pairing import PairingDecision


def small_config(**kw):
    base = dict(
        generator=GeneratorConfig(n_inputs=3, n_outputs=3, min_inputs_per_output=2, max_inputs_per_output=3,
                                  max_tf_order=2, seed=4),
        simulation=SimulationConfig(horizon=300.0, eta_grid=(0.3, 1.0, 3.0)),
        n_systems=2,
    )
    base.update(kw)
    return BenchmarkConfig(**base)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    cfg = small_config()
    summary = run_benchmark(cfg, out)
    return cfg, out, summary


class TestConfig:
    def test_round_trip(self):
        cfg = small_config(rho=1.5, ni=False)
        assert BenchmarkConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_empty_eta_grid(self):
        with pytest.raises(BenchmarkConfigError):
            BenchmarkConfig.from_dict({"simulation": {"eta_grid": []}})

    @pytest.mark.parametrize("d", [{"n_systems": 0}, {"measures": ["RGA"]}, {"methods": ["pid"]},
                                   {"control_kinds": []}, {"rho": -1}, {"bogus": 1}])
    def test_invalid(self, d):
        with pytest.raises(BenchmarkConfigError):
            BenchmarkConfig.from_dict(d)


class TestRun:
    def test_outputs(self, small_run):
        cfg, out, summary = small_run
        rows = list(csv.DictReader(io.StringIO((out / "report.csv").read_text())))
        per_system = len(cfg.measures) * len(cfg.scalings) * len(cfg.control_kinds) * len(cfg.methods)
        assert len(rows) == cfg.n_systems * per_system
        assert tuple(rows[0]) == CSV_FIELDS
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"] == json.loads(json.dumps(cfg.to_dict()))
        assert manifest["seed"] == 4 and "wall_time_s" in manifest
        assert summary["n_systems"] == 2 and summary["n_failed"] == 0

    def test_scores_pooled(self, small_run):
        cfg, out, _ = small_run
        rows = list(csv.DictReader(io.StringIO((out / "report.csv").read_text())))
        for sid in (0, 1):
            for method in cfg.methods:
                mine = [r for r in rows if r["system_id"] == str(sid) and r["method"] == method]
                costs = [float(r["cost"]) for r in mine]
                finite = [c for c in costs if math.isfinite(c)]
                for r, c in zip(mine, costs):
                    s = float(r["score"])
                    assert 0.0 <= s <= 1.0
                    assert s == (min(finite) / c if math.isfinite(c) else 0.0)
                assert max(float(r["score"]) for r in mine) == 1.0

    def test_row_matches_direct_evaluation(self, small_run):
        cfg, out, _ = small_run
        rows = list(csv.DictReader(io.StringIO((out / "report.csv").read_text())))
        r = next(r for r in rows if r["control_kind"] == "decentralized" and r["method"] == "imc")
        dec = PairingDecision([int(x) for x in r["pairing"].split("-")], 0.0)
        res = evaluate_configuration(generate(cfg.generator, int(r["system_id"])), dec, "imc", cfg.simulation)
        assert float(r["cost"]) == res.cost and float(r["best_eta"]) == res.best_eta

    def test_summary_layout(self, small_run):
        cfg, out, _ = small_run
        doc = json.loads((out / "summary.json").read_text())
        cell = doc["scores"]["total"]["lambda"]["PM"]["decentralized"]
        assert set(cell) == {s.value for s in cfg.scalings}
        assert cell["NONE"]["n"] == 2 and "t_test" not in cell["NONE"]
        assert "t_test" in cell["SINKHORN_KNOPP"]
        assert set(doc["scores"]) == {"reference", "disturbance", "total"}

    def test_rerun_bit_identical(self, small_run):
        cfg, out, _ = small_run
        again = rerun_row_source(out / "manifest.json", 1)
        assert report_csv([again]).splitlines()[1:] == [
            line for line in (out / "report.csv").read_text().splitlines()[1:] if line.startswith("1,")]

    def test_deterministic_and_resumable(self, small_run, tmp_path):
        cfg, out, _ = small_run
        fresh = tmp_path / "fresh"
        run_benchmark(cfg, fresh)
        assert (fresh / "report.csv").read_bytes() == (out / "report.csv").read_bytes()
        assert (fresh / "summary.json").read_bytes() == (out / "summary.json").read_bytes()
        # drop one cached system and resume
        (fresh / "systems" / "system_0002.json").unlink()
        (fresh / "report.csv").unlink()
        run_benchmark(cfg, fresh)
        assert (fresh / "report.csv").read_bytes() == (out / "report.csv").read_bytes()
        assert json.loads((fresh / "manifest.json").read_text())["resumed_systems"] == 1

    def test_parallel_identical(self, small_run, tmp_path):
        cfg, out, _ = small_run
        run_benchmark(cfg, tmp_path / "par", jobs=2)
        assert (tmp_path / "par" / "report.csv").read_bytes() == (out / "report.csv").read_bytes()
        assert (tmp_path / "par" / "summary.json").read_bytes() == (out / "summary.json").read_bytes()

    def test_mismatched_manifest(self, small_run):
        _, out, _ = small_run
        with pytest.raises(BenchmarkConfigError):
            run_benchmark(small_config(rho=5.0), out)


def test_failed_system_recorded(monkeypatch):
    import gramscale.benchmark as bm

    def boom(cfg, sid):
        raise RuntimeError("generator exploded")

    monkeypatch.setattr(bm, "generate", boom)
    res = evaluate_system(small_config(), 0)
    assert res["rows"] == [] and "generator exploded" in res["error"]
    text = report_csv([res])
    assert "generator exploded" in text
