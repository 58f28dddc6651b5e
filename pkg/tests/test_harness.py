import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from chansep import cli
from chansep.channel import SystemConfig
from chansep.harness import (
    CSV_HEADER,
    METHODS,
    TARGET,
    SweepSpec,
    TrialResult,
    aggregate,
    format_kappa,
    run_sweep,
    sweep_from_mapping,
    to_csv,
)

CFG = SystemConfig(M_y=4, M_z=2)
FAST = ("Random", "MaxRSum", "MinMseTot", "MuiqSum", "MuiqZf", "MuiqMmse")


def tiny_spec(**kw):
    base = dict(n_grid=((2, 2),), k_list=(2,), kappa_br_list=(math.inf,), methods=FAST,
                trials=2, seed=3, restarts=2)
    base.update(kw)
    return SweepSpec(**base)


class TestSweepSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SweepSpec(trials=0)
        with pytest.raises(ValueError, match="unknown methods"):
            SweepSpec(methods=("Magic",))
        with pytest.raises(ValueError):
            SweepSpec(n_grid=())

    def test_from_mapping(self):
        spec = sweep_from_mapping({"n_grid": [[2, 4]], "kappa_br_list": ["inf", 1],
                                   "methods": "Random, MaxRSum", "trials": 3}, seed=9)
        assert spec.n_grid == ((2, 4),) and spec.kappa_br_list == (math.inf, 1.0)
        assert spec.methods == ("Random", "MaxRSum") and spec.seed == 9

    def test_targets(self):
        assert set(TARGET) == set(METHODS) - {"Random"}


class TestRunSweep:
    def test_row_count(self):
        rows = list(run_sweep(CFG, tiny_spec(trials=1, methods=METHODS)))
        assert len(rows) == len(METHODS) * 4

    def test_paired_realizations(self):
        rows = list(run_sweep(CFG, tiny_spec(kappa_br_list=(math.inf, 1.0))))
        by_trial = {}
        for r in rows:
            by_trial.setdefault((r.kappa_br, r.trial), set()).add(r.realization)
        assert all(len(v) == 1 for v in by_trial.values())
        assert len({next(iter(v)) for v in by_trial.values()}) == len(by_trial)

    def test_objective_consistency(self):
        for r in run_sweep(CFG, tiny_spec(trials=3, methods=METHODS)):
            if r.objective is not None:
                assert r.value == pytest.approx(r.objective, rel=1e-8)

    def test_forced_flag(self):
        rows = list(run_sweep(CFG, tiny_spec(kappa_br_list=(1.0,), trials=1)))
        assert all("forced-separation" in r.flags for r in rows)

    def test_zf_failures_recorded(self):
        cfg = SystemConfig(M_y=1, M_z=1)
        rows = list(run_sweep(cfg, tiny_spec(methods=("Random", "MuiqZf"), trials=2)))
        zf = [r for r in rows if r.metric == "ZfRate"]
        assert all(r.failed for r in zf)
        assert any("zf-rank-deficient" in r.flags for r in zf)
        assert any("design-failed" in r.flags for r in zf)
        table = {(t["method"], t["metric"]): t for t in aggregate(rows)}
        assert table[("Random", "ZfRate")]["failures"] == 2
        assert table[("Random", "ZfRate")]["trials"] == 0
        assert table[("Random", "SumRate")]["failures"] == 0

    def test_workers_do_not_change_results(self):
        spec = tiny_spec(trials=3)
        assert to_csv(aggregate(run_sweep(CFG, spec))) == to_csv(aggregate(run_sweep(CFG, spec, workers=2)))

    def test_closed_form_beats_random(self):
        spec = SweepSpec(n_grid=((8, 8),), k_list=(2,), kappa_br_list=(math.inf,),
                         methods=("Random", "MaxRSum"), trials=200, seed=1)
        t = {(r["method"], r["metric"]): r["mean"]
             for r in aggregate(run_sweep(SystemConfig(M_y=4, M_z=4), spec))}
        assert t[("MaxRSum", "SumRate")] > t[("Random", "SumRate")]


def result(v, trial=0):
    return TrialResult(trial, 4, 2, math.inf, "Random", "SumRate", v, 1)


class TestAggregate:
    def test_single(self):
        (row,) = aggregate([result(5.0)])
        assert row["mean"] == 5.0 and row["stderr"] == 0.0 and row["trials"] == 1

    def test_two(self):
        (row,) = aggregate([result(1.0), result(3.0, 1)])
        assert row["mean"] == 2.0 and row["stderr"] == pytest.approx(1.0)

    def test_stderr_definition(self):
        spec = tiny_spec(methods=("Random",), trials=500)
        rows = [r for r in run_sweep(CFG, spec) if r.metric == "SumRate"]
        v = np.array([r.value for r in rows])
        (row,) = [t for t in aggregate(rows)]
        assert abs(row["stderr"] - v.std(ddof=1) / np.sqrt(500)) <= 1e-12

    def test_nan_excluded(self):
        (row,) = aggregate([result(1.0), result(math.nan, 1)])
        assert row["trials"] == 1 and row["failures"] == 1 and row["mean"] == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestCsv:
    def test_header_and_format(self):
        text = to_csv(aggregate([result(1.0 / 3.0), result(2.0, 1)]))
        lines = text.splitlines()
        assert lines[0] == "N,K,kappa_br,method,metric,mean,stderr,trials,failures"
        assert tuple(lines[0].split(",")) == CSV_HEADER
        row = next(csv.DictReader(io.StringIO(text)))
        assert row["kappa_br"] == "inf"
        assert row["mean"] == format((1 / 3 + 2) / 2, ".12g")
        assert len(row["mean"].replace(".", "").lstrip("0")) <= 12

    def test_kappa_format(self):
        assert format_kappa(math.inf) == "inf" and format_kappa(1.0) == "1"


CONFIG = """\
M_y = 4
M_z = 2
n_grid = [[2, 2]]
k_list = [2]
kappa_br_list = ["inf"]
methods = ["Random", "MaxRSum"]
trials = 2
seed = 5
"""


class TestCli:
    def test_run_flags_override(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text(CONFIG)
        out = tmp_path / "o.csv"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out),
                         "--trials", "3", "--methods", "Random,MuiqSum", "--seed", "2"]) == 0
        rows = list(csv.DictReader(out.open()))
        assert {r["method"] for r in rows} == {"Random", "MuiqSum"}
        assert all(r["trials"] == "3" for r in rows)
        # without --out the same CSV goes to stdout
        assert cli.main(["run", "--config", str(cfg), "--trials", "3",
                         "--methods", "Random,MuiqSum", "--seed", "2"]) == 0
        assert capsys.readouterr().out == out.read_text()

    def test_bad_config_fails_before_running(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text(CONFIG + "bogus = 1\n")
        assert cli.main(["run", "--config", str(cfg)]) == 2
        assert "bogus" in capsys.readouterr().err
        assert cli.main(["run", "--config", str(tmp_path / "c.toml"), "--methods", "Nope"]) == 2

    def test_single(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text(CONFIG)
        assert cli.main(["single", "--config", str(cfg)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert set(data["methods"]) == {"Random", "MaxRSum"}
        entry = data["methods"]["MaxRSum"]
        assert len(entry["phases"]) == 4 and len(entry["w"]["re"]) == 2
        assert {"SumRate", "ZfRate", "MmseRate", "MseTot"} <= set(entry)
        assert np.array(data["Q_sum"]["re"]).shape == (2, 2)

    def test_module_entry_point_is_deterministic(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text(CONFIG)
        outs = []
        for i in range(2):
            out = tmp_path / f"{i}.csv"
            subprocess.run([sys.executable, "-m", "chansep", "run", "--config", str(cfg),
                            "--out", str(out)], check=True)
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
