import csv

import numpy as np
import pytest

from scaledgp.bench import cli
from scaledgp.bench.config import DEFAULTS, ConfigError, dump_config, load_config, methods_of, parse_config
from scaledgp.bench.runner import (
    build_problem,
    emit_plotdata,
    problem_hash,
    rate_envelope,
    read_iteration_csv,
    read_plotdata,
    relative_gap,
    resolve_rho,
    run_benchmark,
)
from scaledgp.core import IterationEntry, RunRecord
from scaledgp.imaging.io import read_raw


def _quadratic_cfg(tmp_path, **extra):
    text = "[problem]\nkind = quadratic\nseed = 3\n[run]\nmax_iter = 400\nrecord_time = false\n"
    text += "".join(f"{k} = {v}\n" for k, v in extra.items())
    path = tmp_path / "q.cfg"
    path.write_text(text)
    return path


class TestConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg == DEFAULTS and cfg is not DEFAULTS
        assert methods_of(cfg) == ["gp", "sgp-fixed", "sgp"]

    def test_sections_and_dotted_keys(self):
        cfg = parse_config("[problem]\nsize = 32  # small\nseed=4\nmodel.nu = 0.1\n\n[run]\nrecord_time = no\n")
        assert cfg["problem.size"] == 32 and cfg["problem.seed"] == 4
        assert cfg["model.nu"] == 0.1 and cfg["run.record_time"] is False

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[problem]\nsizee = 3\n")

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            parse_config("problem.size = large\n")
        with pytest.raises(ConfigError):
            parse_config("run.record_time = maybe\n")
        with pytest.raises(ConfigError):
            parse_config("just some text\n")

    def test_round_trip(self):
        cfg = parse_config("model.nu = 0.0125\nsolver.methods = sgp\n")
        assert parse_config(dump_config(cfg)) == cfg

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_rho(self):
        assert resolve_rho("auto", np.array([5.0, 200.0])) == pytest.approx(0.02)
        assert resolve_rho("1.5", None) == 1.5
        with pytest.raises(ConfigError):
            resolve_rho("big", None)

    def test_hash_ignores_output_settings(self):
        a = load_config()
        b = dict(a, **{"output.dir": "elsewhere", "solver.methods": "gp"})
        c = dict(a, **{"problem.seed": 1})
        assert problem_hash(a) == problem_hash(b) != problem_hash(c)


class TestOutputs:
    def test_plotdata_round_trip_and_order(self, tmp_path):
        rec_a = RunRecord([IterationEntry(k, 10.0 - k, 1.0, 0.5, 0.1, 1.0, 0.0) for k in range(3)])
        rec_b = RunRecord([IterationEntry(k, 9.0 - k, 0.5, 2.0, 0.1, 3.0, 0.0) for k in range(2)])
        n = emit_plotdata(tmp_path / "p.csv", {"sgp": rec_a, "gp": rec_b}, 5.0)
        rows = read_plotdata(tmp_path / "p.csv")
        assert n == len(rows) == 5
        assert [r[:2] for r in rows] == [("gp", 0), ("gp", 1), ("sgp", 0), ("sgp", 1), ("sgp", 2)]
        assert rows[2][2:] == (10.0, 1.0, 1.0, 0.5, 1.0)

    def test_empty_record_gives_header_only(self, tmp_path):
        emit_plotdata(tmp_path / "p.csv", {"gp": RunRecord()}, 1.0)
        assert (tmp_path / "p.csv").read_text() == "method,k,f,rel_gap,lambda,alpha,mu\n"

    def test_gap_and_envelope(self):
        f = np.array([4.0, 3.0, 2.5, 2.0])
        assert np.allclose(relative_gap(f, 2.0), [1.0, 0.5, 0.25, 0.0])
        assert np.allclose(rate_envelope(f, 2.0), [0.0, 1.0, 1.0, 1.0])


class TestBenchmark:
    def test_quadratic_smoke(self, tmp_path):
        cfg = load_config(_quadratic_cfg(tmp_path))
        results, gt = run_benchmark(cfg, tmp_path / "out")
        assert [r.status for r in results] == ["ok"] * 3
        for r in results:
            assert r.final_rel_gap <= 1e-10
            rows = read_iteration_csv(tmp_path / "out" / f"{r.method}.csv")
            assert [row["k"] for row in rows] == list(range(len(rows)))
        with open(tmp_path / "out" / "summary.csv", newline="") as fh:
            summary = list(csv.DictReader(fh))
        assert [s["method"] for s in summary] == ["gp", "sgp-fixed", "sgp"]

    def test_quadratic_exact_optimum(self, tmp_path):
        cfg = load_config(_quadratic_cfg(tmp_path))
        problem = build_problem(cfg)
        x_star, f_star = problem.exact
        assert problem.region.contains(x_star)

    def test_deterministic_csvs(self, tmp_path):
        cfg = load_config(_quadratic_cfg(tmp_path))
        run_benchmark(cfg, tmp_path / "a")
        run_benchmark(cfg, tmp_path / "b")
        for name in ("gp.csv", "sgp-fixed.csv", "sgp.csv", "summary.csv", "plotdata.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestCli:
    def test_bench_ok(self, tmp_path, capsys):
        code = cli.main(["bench", "--config", str(_quadratic_cfg(tmp_path)), "--out", str(tmp_path / "o"),
                         "--method", "sgp", "--method", "gp"])
        assert code == 0
        out = capsys.readouterr().out
        assert "sgp" in out and "gp" in out
        assert sorted(p.name for p in (tmp_path / "o").glob("*.csv")) == ["gp.csv", "plotdata.csv", "sgp.csv",
                                                                          "summary.csv"]

    def test_config_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("problem.colour = red\n")
        assert cli.main(["bench", "--config", str(bad)]) == 3
        assert cli.main(["bench", "--config", str(_quadratic_cfg(tmp_path)), "--method", "newton"]) == 3
        assert cli.main(["bench", "--seed", "-1", "--config", str(_quadratic_cfg(tmp_path))]) == 3
        assert "config error" in capsys.readouterr().err

    def test_solver_failure_exit(self, tmp_path):
        # one backtrack cannot tame a huge first steplength
        cfg = _quadratic_cfg(tmp_path, **{"solver.alpha_0": 1e5, "solver.max_backtracks": 1})
        assert cli.main(["bench", "--config", str(cfg), "--out", str(tmp_path / "o"), "--method", "gp"]) == 2

    def test_simulate(self, tmp_path):
        cfg = tmp_path / "s.cfg"
        cfg.write_text("problem.size = 16\n")
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "sim"), "--seed", "2"]) == 0
        data = read_raw(tmp_path / "sim" / "data.sgi")
        assert data.shape == (16, 16) and np.all(data == np.round(data))
        assert (tmp_path / "sim" / "truth.pgm").exists()

    def test_groundtruth_cache(self, tmp_path):
        cfg = tmp_path / "g.cfg"
        cfg.write_text("problem.size = 16\nrun.groundtruth_iters = 30\n")
        args = ["groundtruth", "--config", str(cfg), "--out", str(tmp_path / "gt")]
        assert cli.main(args) == 0
        cached = list((tmp_path / "gt" / "cache").glob("groundtruth-*.npz"))
        assert len(cached) == 1
        first = (tmp_path / "gt" / "groundtruth.txt").read_text()
        assert cli.main(args) == 0
        assert (tmp_path / "gt" / "groundtruth.txt").read_text() == first

    def test_autoparam_small(self, tmp_path, capsys):
        cfg = tmp_path / "a.cfg"
        cfg.write_text("problem.size = 32\nproblem.psf_size = 9\nproblem.psf_variance = 2\nrun.record_time = false\n")
        code = cli.main(["autoparam", "--config", str(cfg), "--out", str(tmp_path / "ap"), "--method", "sgp"])
        assert code == 0
        with open(tmp_path / "ap" / "autoparam_summary.csv", newline="") as fh:
            (row,) = list(csv.DictReader(fh))
        assert row["status"] == "ok" and abs(float(row["discrepancy"]) - 1.0) <= 5e-3
        assert read_raw(tmp_path / "ap" / "reconstruction_sgp.sgi").shape == (32, 32)
