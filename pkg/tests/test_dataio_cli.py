"""Tests for file formats and the command-line surface."""

import json
import math

import numpy as np
import pytest

from fcrkit.cli import main
from fcrkit.dataio import (
    dump_json,
    format_float,
    load_config,
    read_dataset,
    write_dataset,
)
from fcrkit.errors import ConfigError, DataFormatError
from fcrkit.model import MixturePrior, posterior_at
from fcrkit.procedures import eb_fcr_intervals
from fcrkit.regions import credible_region_at_level
from fcrkit.selection import Batch, Threshold, select

BASE_CONFIG = {
    "sigma2": 1.0,
    "prior": {"p": 0.1, "tau2": 4.0},
    "m": 300,
    "rule": {"kind": "threshold", "c": 2.0},
    "q": 0.05,
    "procedures": ["BY", "QH", "EBFCR"],
    "eb_mode": "OraclePrior",
    "replicates": 300,
    "seed": 17,
}


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = dict(BASE_CONFIG)
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestFormatFloat:
    def test_round_trips(self, rng):
        for v in rng.normal(0.0, 100.0, size=200):
            assert float(format_float(float(v))) == float(v)
        assert float(format_float(0.1)) == 0.1


class TestDumpJson:
    def test_deterministic_and_parseable(self, tmp_path):
        obj = {"a": 0.1, "b": [1, 2.5, None], "c": {"d": True, "e": "x"}, "f": math.nan}
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        dump_json(obj, p1)
        dump_json(obj, p2)
        assert p1.read_bytes() == p2.read_bytes()
        parsed = json.loads(p1.read_text())
        assert parsed["a"] == 0.1
        assert parsed["f"] is None


class TestDatasetIO:
    def test_round_trip(self, tmp_path, rng):
        ids = [f"g{i}" for i in range(50)]
        x = rng.normal(0.0, 3.0, size=50)
        path = tmp_path / "d.csv"
        write_dataset(path, ids, x)
        rids, rx, sigma2 = read_dataset(path)
        assert rids == ids
        assert np.array_equal(rx, x)  # 17g serialization is exact
        assert sigma2 is None

    def test_sigma_column(self, tmp_path):
        path = tmp_path / "d.csv"
        write_dataset(path, ["a", "b"], np.array([1.0, 2.0]), sigma=2.0)
        _, _, sigma2 = read_dataset(path)
        assert sigma2 == pytest.approx(4.0)

    def test_inconsistent_sigma_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,x,sigma\na,1.0,1.0\nb,2.0,2.0\n")
        with pytest.raises(DataFormatError):
            read_dataset(path)

    def test_bad_x_reports_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,x\na,1.0\nb,oops\n")
        with pytest.raises(DataFormatError) as err:
            read_dataset(path)
        assert err.value.line == 3

    def test_empty_and_missing_headers(self, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text("")
        with pytest.raises(DataFormatError):
            read_dataset(empty)
        wrong = tmp_path / "w.csv"
        wrong.write_text("foo,bar\n1,2\n")
        with pytest.raises(DataFormatError):
            read_dataset(wrong)

    def test_duplicate_ids(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,x\na,1.0\na,2.0\n")
        with pytest.raises(DataFormatError):
            read_dataset(path)


class TestLoadConfig:
    def test_valid(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.sigma2 == 1.0
        assert cfg.rule == Threshold(2.0)
        assert cfg.procedures == ("BY", "QH", "EBFCR")

    def test_all_errors_listed(self, tmp_path):
        path = write_config(
            tmp_path,
            q=2.0,
            replicates=0,
            eb_mode="Nope",
            rule={"kind": "mystery"},
            bogus_field=1,
        )
        with pytest.raises(ConfigError) as err:
            load_config(path)
        msg = str(err.value)
        for needle in ("q:", "replicates:", "eb_mode:", "rule.kind:", "bogus_field:"):
            assert needle in msg

    def test_unknown_procedure_rejected(self, tmp_path):
        path = write_config(tmp_path, procedures=["BY", "WAT"])
        with pytest.raises(ConfigError):
            load_config(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("not json {")
        with pytest.raises(ConfigError):
            load_config(path)


class TestCliSimulate:
    def test_deterministic_files(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        assert (out1 / "dataset.csv").read_bytes() == (out2 / "dataset.csv").read_bytes()
        assert (out1 / "truth.csv").read_bytes() == (out2 / "truth.csv").read_bytes()

    def test_null_prior_truth_all_zero(self, tmp_path):
        cfg = write_config(tmp_path, prior={"p": 0.0, "tau2": 4.0})
        out = tmp_path / "o"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        rows = (out / "truth.csv").read_text().strip().splitlines()[1:]
        assert all(float(r.split(",")[1]) == 0.0 for r in rows)

    def test_nonzero_count_within_binomial_bound(self, tmp_path):
        cfg = write_config(tmp_path, m=1000, prior={"p": 0.1, "tau2": 4.0})
        out = tmp_path / "o"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        rows = (out / "truth.csv").read_text().strip().splitlines()[1:]
        k = sum(float(r.split(",")[1]) != 0.0 for r in rows)
        assert abs(k - 100) <= 3 * math.sqrt(1000 * 0.1 * 0.9)


class TestCliEstimate:
    def _dataset(self, tmp_path, m=2000, p=0.2, tau2=4.0):
        rng = np.random.default_rng(4)
        theta = np.where(rng.random(m) < p, rng.normal(0, math.sqrt(tau2), m), 0.0)
        x = theta + rng.normal(0, 1, m)
        path = tmp_path / "data.csv"
        write_dataset(path, [f"g{i}" for i in range(m)], x)
        return str(path)

    def test_writes_fit_json(self, tmp_path):
        cfg = write_config(tmp_path)
        data = self._dataset(tmp_path)
        out = tmp_path / "o"
        assert main(["estimate", "--config", cfg, "--data", data, "--out", str(out)]) == 0
        fit = json.loads((out / "fit.json").read_text())
        assert set(fit) == {"p", "tau2", "sigma2", "loglik", "iterations",
                            "converged", "method", "flags"}
        assert fit["converged"] is True
        assert abs(fit["p"] - 0.2) < 0.1

    def test_nonconvergence_exit_2(self, tmp_path):
        cfg = write_config(tmp_path, estimation={"method": "MarginalMLE", "max_iter": 1})
        data = self._dataset(tmp_path)
        out = tmp_path / "o"
        assert main(["estimate", "--config", cfg, "--data", data, "--out", str(out)]) == 2
        assert (out / "fit.json").exists()  # result still written

    def test_malformed_csv_exit_1(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        bad = tmp_path / "bad.csv"
        bad.write_text("id,x\na,1.0\nb,nope\n")
        assert main(["estimate", "--config", cfg, "--data", str(bad),
                     "--out", str(tmp_path)]) == 1
        assert "line 3" in capsys.readouterr().err

    def test_empty_file_exit_1(self, tmp_path):
        cfg = write_config(tmp_path)
        bad = tmp_path / "bad.csv"
        bad.write_text("")
        assert main(["estimate", "--config", cfg, "--data", str(bad),
                     "--out", str(tmp_path)]) == 1

    def test_inconsistent_sigma_exit_1(self, tmp_path):
        cfg = write_config(tmp_path)
        bad = tmp_path / "bad.csv"
        bad.write_text("id,x,sigma\na,1.0,1.0\nb,2.0,3.0\n")
        assert main(["estimate", "--config", cfg, "--data", str(bad),
                     "--out", str(tmp_path)]) == 1


class TestCliIntervals:
    def test_pipeline_matches_in_memory_bitwise(self, tmp_path):
        cfg = write_config(tmp_path, m=400)
        sim_out = tmp_path / "sim"
        assert main(["simulate", "--config", cfg, "--out", str(sim_out)]) == 0
        run_out = tmp_path / "run"
        assert main(["intervals", "--config", cfg,
                     "--data", str(sim_out / "dataset.csv"),
                     "--out", str(run_out)]) == 0

        ids, x, _ = read_dataset(sim_out / "dataset.csv")
        batch = Batch(ids=tuple(ids), x=x, sigma2=1.0)
        sel = select(batch, Threshold(2.0))
        prior = MixturePrior(p=0.1, tau2=4.0, sigma2=1.0)
        report = eb_fcr_intervals(batch, sel, prior, 0.05)

        lines = (run_out / "intervals_EBFCR.csv").read_text().strip().splitlines()
        assert lines[0] == "procedure,id,x,lower,upper,includes_zero,length"
        assert len(lines) == 1 + sel.R
        for line, row in zip(lines[1:], report.rows):
            parts = line.split(",")
            assert parts[0] == "EBFCR"
            assert parts[1] == row.id
            assert float(parts[2]) == row.x
            if row.region.intervals:
                assert float(parts[3]) == row.region.intervals[0][0]
                assert float(parts[4]) == row.region.intervals[0][1]
            assert float(parts[6]) == row.length

        summary = json.loads((run_out / "intervals_summary.json").read_text())
        assert summary["R"] == sel.R
        assert summary["length_ratios"]["EBFCR_vs_BY"] < 1.0

    def test_single_row_threshold_below(self, tmp_path):
        cfg = write_config(tmp_path, rule={"kind": "threshold", "c": 1.0})
        data = tmp_path / "one.csv"
        data.write_text("id,x\nonly,2.5\n")
        out = tmp_path / "o"
        assert main(["intervals", "--config", cfg, "--data", str(data),
                     "--out", str(out)]) == 0
        for proc in ("BY", "QH", "EBFCR"):
            lines = (out / f"intervals_{proc}.csv").read_text().strip().splitlines()
            assert len(lines) == 2

    def test_by_half_lengths_constant(self, tmp_path):
        cfg = write_config(tmp_path, m=300)
        sim_out = tmp_path / "sim"
        main(["simulate", "--config", cfg, "--out", str(sim_out)])
        out = tmp_path / "o"
        main(["intervals", "--config", cfg, "--data", str(sim_out / "dataset.csv"),
              "--out", str(out)])
        lengths = [
            float(line.split(",")[6])
            for line in (out / "intervals_BY.csv").read_text().strip().splitlines()[1:]
        ]
        # constant up to endpoint-arithmetic roundoff (lengths derive from
        # x +/- half endpoints)
        assert max(lengths) - min(lengths) <= 1e-12 * max(lengths)

    def test_empty_selection_exit_0(self, tmp_path):
        cfg = write_config(tmp_path, rule={"kind": "threshold", "c": 50.0})
        data = tmp_path / "d.csv"
        data.write_text("id,x\na,1.0\nb,-0.5\n")
        out = tmp_path / "o"
        assert main(["intervals", "--config", cfg, "--data", str(data),
                     "--out", str(out)]) == 0
        summary = json.loads((out / "intervals_summary.json").read_text())
        assert summary["empty_selection"] is True

    def test_estimated_prior_mode(self, tmp_path):
        cfg = write_config(tmp_path, m=500, eb_mode="EstimatedPrior")
        sim_out = tmp_path / "sim"
        main(["simulate", "--config", cfg, "--out", str(sim_out)])
        out = tmp_path / "o"
        assert main(["intervals", "--config", cfg,
                     "--data", str(sim_out / "dataset.csv"), "--out", str(out)]) == 0
        summary = json.loads((out / "intervals_summary.json").read_text())
        assert "fit" in summary


class TestCliEvaluate:
    def test_outputs_and_thread_invariance(self, tmp_path):
        cfg = write_config(tmp_path, replicates=200, m=200)
        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        assert main(["evaluate", "--config", cfg, "--out", str(out1),
                     "--threads", "1"]) == 0
        assert main(["evaluate", "--config", cfg, "--out", str(out2),
                     "--threads", "4"]) == 0
        for name in ("eval_BY.json", "eval_QH.json", "eval_EBFCR.json",
                     "eval_long.csv", "replicates_EBFCR.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        long_lines = (out1 / "eval_long.csv").read_text().strip().splitlines()
        assert long_lines[0] == "scenario,procedure,metric,value"

    def test_replicate_dump_consistent_with_report(self, tmp_path):
        cfg = write_config(tmp_path, replicates=150, m=200, procedures=["EBFCR"])
        out = tmp_path / "o"
        assert main(["evaluate", "--config", cfg, "--out", str(out)]) == 0
        rep = json.loads((out / "eval_EBFCR.json").read_text())
        rows = (out / "replicates_EBFCR.csv").read_text().strip().splitlines()[1:]
        V = np.array([int(r.split(",")[2]) for r in rows])
        R = np.array([int(r.split(",")[1]) for r in rows])
        terms = V / np.maximum(R, 1)
        assert rep["fcr_hat"] == pytest.approx(terms.sum() / terms.size, abs=1e-12)

    def test_zero_replicates_exit_1(self, tmp_path):
        cfg = write_config(tmp_path, replicates=0)
        assert main(["evaluate", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_unknown_procedure_exit_1(self, tmp_path):
        cfg = write_config(tmp_path, procedures=["ZZ"])
        assert main(["evaluate", "--config", cfg, "--out", str(tmp_path)]) == 1


class TestCliCompare:
    def test_compare_outputs(self, tmp_path):
        cfg = write_config(tmp_path, replicates=300, m=500)
        out = tmp_path / "o"
        assert main(["compare", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "compare.csv").read_text().strip().splitlines()
        assert lines[0] == (
            "procedure,eb_mode,fcr_hat,fcr_se,avg_length,avg_R,length_ratio_vs_by"
        )
        rows = {line.split(",")[0]: line.split(",") for line in lines[1:]}
        assert float(rows["EBFCR"][6]) < 1.0
        assert float(rows["QH"][4]) >= float(rows["EBFCR"][4])

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path, replicates=100, m=100)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["compare", "--config", cfg, "--out", str(out1), "--seed", "123"])
        main(["compare", "--config", cfg, "--out", str(out2), "--seed", "124"])
        assert (out1 / "compare.csv").read_text() != (out2 / "compare.csv").read_text()


class TestCliMisc:
    def test_backend_info(self, capsys):
        assert main(["--backend-info"]) == 0
        assert "backend:" in capsys.readouterr().out

    def test_no_command_exits_1(self):
        assert main([]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path)]) == 1
