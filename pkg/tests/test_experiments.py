import json
import math

import numpy as np
import pytest

from icereg import FitResult, LogisticModel, ProblemSpec, fit_ice, make_problem
from icereg.cli import UsageError, load_config, main
from icereg.experiments import (CONVERGE_COLUMNS, REFERENCE_C, REPORT_COLUMNS, SUMMARY_COLUMNS, ExperimentConfig,
                                covariance_ratio, entropy_error, run_compare, run_converge, run_variance_ratio,
                                summarize)
from icereg.io import read_table, save_problem

from .conftest import random_dataset


def small_config(tmp_path=None, **kw):
    base = dict(grid=[(3, 1, 200)], replications=4, estimators=("mle", "ice"), n_test=5000, base_seed=3,
                out_dir=None if tmp_path is None else str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


class TestEntropyError:
    def test_identity_and_antisymmetry(self, model):
        rng = np.random.default_rng(80)
        test = random_dataset(rng, 2000, 3)
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        assert entropy_error(model, test, a, a) == 0.0
        assert entropy_error(model, test, a, b) == -entropy_error(model, test, b, a)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(study="bogus")
        with pytest.raises(ValueError):
            ExperimentConfig(replications=1)
        with pytest.raises(ValueError):
            ExperimentConfig(estimators=("mle", "ridge"))
        with pytest.raises(ValueError):
            ExperimentConfig(grid=[])

    def test_load_config(self, tmp_path):
        cfg = tmp_path / "t.cfg"
        cfg.write_text("# comment\ngrid = 5:2:500, 10:4:500\nreplications = 7\nseed = 9\nestimators = mle,ice\n")
        c = load_config(cfg, "compare")
        assert c.grid == [(5, 2, 500), (10, 4, 500)] and c.replications == 7 and c.base_seed == 9
        assert c.estimators == ("mle", "ice")

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "t.cfg"
        cfg.write_text("replicates = 3\n")
        with pytest.raises(UsageError, match="unknown config key"):
            load_config(cfg)


class TestCompare:
    def test_degenerate_self_comparison(self, tmp_path):
        cfg = small_config(tmp_path, grid=[(2, 0, 200)], replications=2, estimators=("mle",))
        _, summaries = run_compare(cfg)
        (s,) = summaries
        assert s.mean_delta == 0.0 and s.t_stat is None
        cols, rows = read_table(tmp_path / "summary.csv")
        assert cols == SUMMARY_COLUMNS and rows[0][cols.index("t_stat")] == ""

    def test_outputs_and_accounting(self, tmp_path):
        cfg = small_config(tmp_path)
        reports, summaries = run_compare(cfg)
        text = (tmp_path / "reports.csv").read_text().splitlines()
        assert text[0].startswith("# config_hash=") and "base_seed=3" in text[0]
        cols, rows = read_table(tmp_path / "reports.csv")
        assert cols == REPORT_COLUMNS and len(rows) == 4 * 2
        for r in reports:
            assert r.outcome("mle").delta_vs_mle == 0.0
        for s in summaries:
            assert s.r_effective + s.errors == cfg.replications
            deltas = np.array([r.outcome(s.estimator).delta_vs_mle for r in reports])
            if s.estimator == "ice":
                expected = deltas.mean() / (deltas.std(ddof=1) / math.sqrt(deltas.size))
                assert s.t_stat == pytest.approx(expected, rel=1e-12)

    def test_summary_recomputes_from_csv(self, tmp_path):
        run_compare(small_config(tmp_path))
        cols, rows = read_table(tmp_path / "reports.csv")
        _, srows = read_table(tmp_path / "summary.csv")
        ice = np.array([float(r[cols.index("delta_vs_mle")]) for r in rows if r[cols.index("estimator")] == "ice"])
        t = ice.mean() / (ice.std(ddof=1) / math.sqrt(ice.size))
        (srow,) = [r for r in srows if r[1] == "ice"]
        assert float(srow[SUMMARY_COLUMNS.index("t_stat")]) == pytest.approx(t, rel=1e-12)

    def test_failures_are_counted(self):
        from icereg.experiments import CellSummary, EstimatorOutcome, ReplicationReport
        reps = [ReplicationReport("c", i, i, [EstimatorOutcome("ice", delta_vs_mle=0.01 * i)]) for i in range(8)]
        reps += [ReplicationReport("c", 8 + i, 0, [EstimatorOutcome("ice", error="SeparationError")]) for i in range(2)]
        (s,) = summarize(reps, ("ice",), 10)
        assert isinstance(s, CellSummary)
        assert s.r_effective == 8 and s.errors == 2 and s.unreliable_flag

    def test_parallel_matches_serial(self, tmp_path):
        run_compare(small_config(tmp_path / "a"))
        run_compare(small_config(tmp_path / "b", parallelism=2))
        for name in ("reports.csv", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestConverge:
    def test_table_shape(self, tmp_path):
        cfg = ExperimentConfig(study="converge", grid=[(3, 1, 200)], problems=2, train_sizes=(200, 800),
                               n_test=5000, out_dir=str(tmp_path), folds=5)
        table = run_converge(cfg)
        cols, rows = read_table(tmp_path / "converge.csv")
        assert cols == CONVERGE_COLUMNS and len(rows) == 2
        assert table[0]["H_theta0"] == table[1]["H_theta0"]


class TestVarianceRatio:
    def test_self_ratio_is_one(self):
        a = np.random.default_rng(0).standard_normal((50, 3))
        ratio, per = covariance_ratio(a, a)
        assert ratio == 1.0 and np.all(per == 1.0)

    def test_report_is_deterministic(self, tmp_path):
        kw = dict(study="variance-ratio", grid=[(3, 1, 300)], replications=10, bootstrap=50, n_test=2000)
        a = run_variance_ratio(ExperimentConfig(out_dir=str(tmp_path), **kw))
        b = run_variance_ratio(ExperimentConfig(**kw))
        assert a == b
        saved = json.loads((tmp_path / "variance_ratio.json").read_text())
        assert saved["reference_c"] == REFERENCE_C and saved["R"] == 10
        assert saved["ci_low"] <= saved["trace_ratio"] <= saved["ci_high"] or saved["R_effective"] < 10
        assert len(saved["per_coord_ratios"]) == 4


class TestCli:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["compare", "--frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_out_dir(self):
        assert main(["compare", "--replications", "2"]) == 1

    def test_runtime_error_exit_code(self, tmp_path):
        assert main(["fit", "--problem", str(tmp_path / "missing"), "--estimator", "mle"]) == 2

    def test_gen_fit_criteria(self, tmp_path, capsys):
        pdir = tmp_path / "prob"
        assert main(["gen", "--p", "3", "--m", "1", "--n", "400", "--n-test", "1000", "--seed", "5",
                     "--out", str(pdir)]) == 0
        fit_path = tmp_path / "fit.json"
        assert main(["fit", "--problem", str(pdir), "--estimator", "ice", "--out", str(fit_path)]) == 0
        problem = make_problem(ProblemSpec(3, 1, 400, n_test=1000, seed=5))
        direct = fit_ice(LogisticModel(), problem.train)
        np.testing.assert_array_equal(FitResult.from_json(fit_path.read_text()).theta, direct.theta)

        mle_path = tmp_path / "mle.json"
        assert main(["fit", "--problem", str(pdir), "--estimator", "mle", "--out", str(mle_path)]) == 0
        capsys.readouterr()
        assert main(["criteria", "--problem", str(pdir), "--fit", str(mle_path), "--ric-lambda", "0"]) == 0
        lines = [json.loads(s) for s in capsys.readouterr().out.splitlines()]
        assert [r["name"] for r in lines] == ["AIC", "TIC", "RIC"]
        assert lines[2]["value"] == pytest.approx(lines[1]["value"], rel=1e-12)

    def test_criteria_large_n_trace_near_p(self, tmp_path, capsys, model):
        from icereg import fit_mle
        prob = make_problem(ProblemSpec(5, 0, 50_000, n_test=1000, seed=2))
        save_problem(prob, tmp_path / "big")
        (tmp_path / "fit.json").write_text(fit_mle(model, prob.train).to_json())
        assert main(["criteria", "--problem", str(tmp_path / "big"), "--fit", str(tmp_path / "fit.json")]) == 0
        tic = [json.loads(s) for s in capsys.readouterr().out.splitlines()][1]
        assert abs(tic["correction"] - 6) < 0.9

    def test_compare_twice_identical(self, tmp_path):
        cfg = tmp_path / "t3.cfg"
        cfg.write_text("grid = 3:1:200\nestimators = mle,ice\nn_test = 3000\n")
        for d in ("a", "b"):
            assert main(["compare", "--config", str(cfg), "--replications", "3", "--seed", "7",
                         "--out", str(tmp_path / d)]) == 0
        for name in ("reports.csv", "summary.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
