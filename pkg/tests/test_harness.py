import numpy as np
import pytest

from proxfilter.belief import GaussianBelief
from proxfilter.harness.cli import main
from proxfilter.harness.data import (
    DataSet,
    ExperimentConfig,
    generate_linear_data,
    generate_sigmoid_data,
)
from proxfilter.harness.experiment import run_experiment
from proxfilter.harness.io import (
    TRACE_COLUMNS,
    emit_csv,
    parse_key_values,
    read_dataset,
    read_trace_csv,
    trace_table,
    write_dataset,
)
from proxfilter.models import SigmoidModel
from proxfilter.optimizers import OptimizerConfig, RunTrace, TraceRecord, run
from proxfilter.prox import batch_posterior


class TestGenerate:
    def test_vanishing_noise(self):
        ds = generate_sigmoid_data(ExperimentConfig(d=5, n=200, lam=1e-12), np.random.default_rng(0))
        m = SigmoidModel()
        resid = [abs(o.y - m.eval(ds.theta_star, o.x)) for o in ds]
        assert max(resid) < 1e-5
        lin = generate_linear_data(ExperimentConfig(model="linear", d=5, n=200, lam=1e-12), np.random.default_rng(0))
        assert np.max(np.abs(lin.y - lin.X @ lin.theta_star)) < 1e-5

    def test_noise_mean_clt_bound(self):
        n, lam = 100_000, 0.2
        ds = generate_sigmoid_data(ExperimentConfig(d=3, n=n, lam=lam), np.random.default_rng(1))
        m = SigmoidModel()
        eps = ds.y - np.array([m.eval(ds.theta_star, x) for x in ds.X])
        assert abs(eps.mean()) <= 4 * np.sqrt(lam) / np.sqrt(n)
        assert eps.var() == pytest.approx(lam, rel=0.02)

    def test_shapes(self):
        ds = generate_sigmoid_data(ExperimentConfig(), np.random.default_rng(2))
        assert ds.X.shape == (2000, 20) and ds.theta_star.shape == (21,) and ds.d == 21
        lin = generate_linear_data(ExperimentConfig(model="linear", d=4, n=7), np.random.default_rng(2))
        assert lin.X.shape == (7, 4) and lin.d == 4

    def test_linear_posterior_consistency(self):
        cfg = ExperimentConfig(model="linear", d=5, n=10_000)
        ds = generate_linear_data(cfg, np.random.default_rng(3))
        post = batch_posterior(GaussianBelief.prior(np.zeros(5)), ds, cfg.lam)
        assert np.linalg.norm(post.mean - ds.theta_star) < 0.1

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            ds = generate_sigmoid_data(ExperimentConfig(d=4, n=50, seed=9), np.random.default_rng(9))
            write_dataset(ds, tmp_path / f"{name}.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv.meta").read_bytes() == (tmp_path / "b.csv.meta").read_bytes()

    @pytest.mark.parametrize("kwargs", [dict(d=1), dict(n=0), dict(lam=0.0), dict(model="poly")])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            ExperimentConfig(**kwargs)


class TestTraceCsv:
    def test_empty_trace_is_header_only(self, tmp_path):
        emit_csv(RunTrace("ekf", TraceRecord(k=0)), tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == ",".join(TRACE_COLUMNS) + "\n"

    def test_round_trip(self, tmp_path, rng):
        ds = generate_sigmoid_data(ExperimentConfig(d=4, n=60), rng)
        for algo in ("ekf", "approx-ipm", "sgd"):
            cfg = OptimizerConfig(algo)
            init = GaussianBelief.prior(np.zeros(4)) if cfg.is_filter else np.zeros(4)
            trace = run(cfg, SigmoidModel(), ds, init, 60, theta_star=ds.theta_star)
            emit_csv(trace, tmp_path / f"{algo}.csv")
            back = read_trace_csv(tmp_path / f"{algo}.csv", algo)
            assert trace_table(back) == trace_table(trace)

    def test_rectangular_with_unix_newlines(self, tmp_path, rng):
        ds = generate_sigmoid_data(ExperimentConfig(d=3, n=30), rng)
        trace = run(OptimizerConfig("sgd"), SigmoidModel(), ds, np.zeros(3), 30)
        emit_csv(trace, tmp_path / "t.csv")
        raw = (tmp_path / "t.csv").read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert len(lines) == 31
        assert {line.count(",") for line in lines} == {len(TRACE_COLUMNS) - 1}

    def test_seventeen_significant_digits(self, tmp_path):
        rec = TraceRecord(k=1, step_norm=0.1, param_error=1 / 3)
        emit_csv(RunTrace("sgd", TraceRecord(k=0), [rec]), tmp_path / "t.csv")
        row = (tmp_path / "t.csv").read_text().splitlines()[1]
        assert row == "1,0.10000000000000001,0.33333333333333331,,,"

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            emit_csv(RunTrace("sgd", TraceRecord(k=0)), tmp_path / "missing" / "t.csv")


class TestDatasetFile:
    def test_round_trip(self, tmp_path, rng):
        ds = generate_sigmoid_data(ExperimentConfig(d=4, n=25, seed=11), rng)
        write_dataset(ds, tmp_path / "d.csv")
        back = read_dataset(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.y, ds.y)
        np.testing.assert_array_equal(back.theta_star, ds.theta_star)
        assert (back.model, back.lam, back.seed, back.d) == ("sigmoid", 0.2, 11, 4)
        assert (tmp_path / "d.csv").read_text().splitlines()[0] == "y,x1,x2,x3"

    def test_metadata_mismatch(self, tmp_path, rng):
        ds = generate_linear_data(ExperimentConfig(model="linear", d=3, n=5), rng)
        write_dataset(ds, tmp_path / "d.csv")
        meta = tmp_path / "d.csv.meta"
        meta.write_text(meta.read_text().replace("d = 3", "d = 4"))
        with pytest.raises(ValueError):
            read_dataset(tmp_path / "d.csv")


def test_key_value_parser():
    parsed = parse_key_values("# comment\nalgo = ekf approx-ipm\n\nout-dir = res  # trailing\n")
    assert parsed == {"algo": "ekf approx-ipm", "out_dir": "res"}
    with pytest.raises(ValueError):
        parse_key_values("no equals sign")


class TestExperiment:
    def test_kalman_sequential_equals_batch(self):
        cfg = ExperimentConfig(model="linear", d=5, n=300, algorithms=("kalman",))
        res = run_experiment(cfg)
        ref = batch_posterior(GaussianBelief.prior(res.theta0), res.dataset, cfg.lam)
        final = res.traces["kalman"].final
        np.testing.assert_allclose(final.mean, ref.mean, rtol=1e-8)
        np.testing.assert_allclose(final.covariance, ref.covariance, rtol=1e-8, atol=1e-14)

    def test_zero_iterations_summary(self, tmp_path):
        cfg = ExperimentConfig(d=4, n=20, iterations=0, algorithms=("ekf", "sgd"), out_dir=tmp_path)
        res = run_experiment(cfg)
        ekf_row, sgd_row = res.summary
        assert ekf_row[2] == 0 and ekf_row[4] is None
        assert ekf_row[5] == pytest.approx(np.linalg.norm(res.theta0 - res.dataset.theta_star))
        assert ekf_row[6] == 1.0 and ekf_row[7] == 0.0
        assert sgd_row[6] is None
        assert len((tmp_path / "ekf.csv").read_text().splitlines()) == 1

    def test_shared_initialization(self):
        res = run_experiment(ExperimentConfig(d=4, n=30, algorithms=("ekf", "approx-ipm", "sgd")))
        errs = {a: t.initial.param_error for a, t in res.traces.items()}
        assert len(set(errs.values())) == 1

    def test_linear_only_algorithms_reject_sigmoid_data(self):
        with pytest.raises(ValueError):
            run_experiment(ExperimentConfig(d=3, n=10, algorithms=("kalman",)))

    def test_divergence_recorded_in_summary(self, tmp_path):
        cfg = ExperimentConfig(
            model="linear", d=3, n=100, iterations=3000, algorithms=("sgd",), sgd_stepsize=50.0,
            out_dir=tmp_path,
        )
        res = run_experiment(cfg)
        row = res.summary[0]
        assert row[3] is not None and row[2] == row[3] - 1
        summary = (tmp_path / "summary.csv").read_text().splitlines()
        assert summary[1].split(",")[3] == str(row[3])


class TestCli:
    def test_gen_data_then_run(self, tmp_path, capsys):
        data = tmp_path / "lin.csv"
        assert main(["gen-data", "--model", "linear", "--d", "4", "--n", "80", "--seed", "3", "--out", str(data)]) == 0
        out = tmp_path / "res"
        code = main(["run", "--data", str(data), "--algo", "kalman", "ipm-fixed", "--out-dir", str(out)])
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == ["ipm-fixed.csv", "kalman.csv", "summary.csv"]
        assert len((out / "kalman.csv").read_text().splitlines()) == 81
        assert "kalman,80,80" in capsys.readouterr().out

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("model = sigmoid\nd = 5\nn = 40\nalgo = ekf, sgd\niterations = 10\nsgd-decay = true\n")
        out = tmp_path / "res"
        assert main(["run", "--config", str(cfg), "--iterations", "15", "--out-dir", str(out)]) == 0
        assert len((out / "ekf.csv").read_text().splitlines()) == 16
        assert (out / "sgd.csv").exists()

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("colour = blue\n")
        with pytest.raises(SystemExit):
            main(["run", "--config", str(cfg)])

    def test_prediction_and_random_schedule_flags(self, tmp_path):
        out = tmp_path / "res"
        args = ["run", "--d", "4", "--n", "50", "--algo", "ekf", "--q", "1e-3", "--schedule", "random", "--out-dir", str(out)]
        assert main(args) == 0
        assert len((out / "ekf.csv").read_text().splitlines()) == 51

    def test_check_subcommand(self, capsys):
        assert main(["check"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 5 and all(line.startswith("PASS") for line in lines)

    def test_check_fails_loudly(self, monkeypatch, capsys):
        import proxfilter.harness.cli as cli

        monkeypatch.setattr(cli, "run_checks", lambda seed: [("broken", False, "forced")])
        assert main(["check"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_io_error_exit_code(self, tmp_path, capsys):
        assert main(["run", "--data", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 2
        assert "nope.csv" in capsys.readouterr().err
