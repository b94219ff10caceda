"""Command-line orchestration: config parsing, seeding, CSV contracts."""

import csv
from pathlib import Path

import numpy as np
import pytest

from fiberfrp import kernels, metrics
from fiberfrp.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    ExperimentConfig,
    derive_rng,
    ensure_simulation,
    load_config,
    main,
    random_symbols,
    read_sim_csv,
    run_chain,
)
from fiberfrp.signal import ConfigurationError

REPO_CONFIG = Path(__file__).resolve().parent.parent / "configs" / "example.ini"


def fast_args(tmp_path, extra=()):
    cfg = tmp_path / "fast.ini"
    cfg.write_text(
        "[signal]\nn_sym = 256\n"
        "[ssfm]\nstep_m = 2000\n"
        "[sweep]\npowers_dbm = 0\nmemories = 0\n"
        "[optimizer]\nbatch_size = 128\n"
    )
    return ["--config", str(cfg), "--out", str(tmp_path / "out"), *extra]


class TestConfig:
    def test_defaults_match_example_file(self):
        assert load_config(REPO_CONFIG) == ExperimentConfig()

    def test_sections_parsed(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text(
            "[fiber]\nlength_km = 80\n[sweep]\npowers_dbm = 1 3\nmemories = 2\n"
            "[run]\nseed = 7\n"
        )
        cfg = load_config(path)
        assert cfg.length_km == 80
        assert cfg.powers_dbm == (1.0, 3.0)
        assert cfg.memories == (2,)
        assert cfg.seed == 7

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("[laser]\npower = 1\n")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "absent.ini")

    def test_empty_sweep_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(powers_dbm=())

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[fiber]\nlength_km = -5\n")
        assert main(["--config", str(path), "simulate"]) == EXIT_CONFIG

    def test_hash_changes_with_values(self):
        assert ExperimentConfig().hash() != ExperimentConfig(seed=2).hash()


class TestSeeding:
    def test_labeled_rngs_independent(self):
        a = derive_rng(1, "symbols").standard_normal(4)
        b = derive_rng(1, "ase").standard_normal(4)
        assert not np.allclose(a, b)

    def test_labeled_rngs_reproducible(self):
        a = derive_rng(5, "symbols").standard_normal(4)
        b = derive_rng(5, "symbols").standard_normal(4)
        np.testing.assert_array_equal(a, b)

    def test_random_symbols_on_constellation(self, small_config, qam16):
        seq = random_symbols(small_config)
        for s in seq.x:
            assert np.min(np.abs(qam16.points - s)) < 1e-12


class TestSimulate:
    def test_csv_round_trip(self, small_config):
        a, r, path = ensure_simulation(small_config, 0.0)
        power, a2, r2 = read_sim_csv(path)
        assert power == 0.0
        np.testing.assert_array_equal(a2.x, a.x)
        np.testing.assert_array_equal(r2.y, r.y)

    def test_byte_identical_reruns(self, small_config, tmp_path):
        _, _, path = ensure_simulation(small_config, 0.0)
        first = path.read_bytes()
        path.unlink()
        ensure_simulation(small_config, 0.0)
        assert path.read_bytes() == first

    def test_header_carries_hash_and_seed(self, small_config):
        _, _, path = ensure_simulation(small_config, 0.0)
        head = path.read_text().splitlines()[0]
        assert head.startswith("# config_hash=")
        assert f"seed={small_config.seed}" in head

    def test_linear_channel_low_error(self, tmp_path):
        cfg = ExperimentConfig(
            gamma_w_km=1e-12,  # positive per config contract, effectively zero
            n_sym=256,
            step_m=2000.0,
            out_dir=str(tmp_path),
        )
        a, r = run_chain(cfg, 0.0)
        assert metrics.relative_error(a, r) < 1e-4

    def test_low_power_perturbative(self, tmp_path):
        cfg = ExperimentConfig(n_sym=256, step_m=500.0, out_dir=str(tmp_path))
        a, r = run_chain(cfg, -10.0)
        assert metrics.relative_error(a, r) < 0.01

    def test_cli_simulate(self, tmp_path, capsys):
        assert main([*fast_args(tmp_path), "simulate", "--power", "0"]) == EXIT_OK
        out = tmp_path / "out"
        assert (out / "sim_P0_s1234.csv").exists()


class TestKernelsCommand:
    def test_writes_tensor_csv_and_certificate(self, tmp_path):
        args = fast_args(tmp_path)
        assert main([*args, "kernels", "--memory", "0"]) == EXIT_OK
        out = tmp_path / "out"
        tensor, grid = kernels.load_tensor(out / "kernels_analytical_M0.bin")
        assert len(tensor) == 1
        assert grid is not None
        assert (out / "kernels_analytical_M0.csv").exists()
        cert = (out / "kernels_analytical_M0.cert.json").read_text()
        assert "kernel_000_refinement_rel_change" in cert


class TestOptimizeAndEvaluate:
    def test_optimize_then_evaluate(self, tmp_path):
        args = fast_args(tmp_path)
        assert main([*args, "kernels", "--memory", "0"]) == EXIT_OK
        assert main([*args, "optimize", "--power", "0", "--memory", "0"]) == EXIT_OK
        out = tmp_path / "out"
        nbgd_file = out / "kernels_nbgd_P0_M0.bin"
        assert nbgd_file.exists()
        assert (out / "kernels_nbgd_P0_M0.report.json").exists()
        code = main(
            [*args, "evaluate", "--power", "0",
             str(out / "kernels_analytical_M0.bin"), str(nbgd_file)]
        )
        assert code == EXIT_OK
        rows = _read_eval(out / "eval_P0.csv")
        assert [r["source"] for r in rows] == ["ssfm", "analytical", "nbgd"]
        assert all(int(r["kernel_count"]) in (0, 1) for r in rows)

    def test_evaluate_memory_mismatch(self, tmp_path):
        args = fast_args(tmp_path)
        main([*args, "kernels", "--memory", "0"])
        out = tmp_path / "out"
        code = main(
            [*args, "evaluate", "--power", "0", "--memory", "1",
             str(out / "kernels_analytical_M0.bin")]
        )
        assert code == EXIT_CONFIG

    def test_cross_constellation_evaluation(self, tmp_path):
        args = fast_args(tmp_path)
        main([*args, "kernels", "--memory", "0"])
        out = tmp_path / "out"
        code = main(
            [*args, "evaluate", "--power", "0", "--constellation", "QPSK",
             str(out / "kernels_analytical_M0.bin")]
        )
        assert code == EXIT_OK
        rows = _read_eval(out / "eval_P0_QPSK.csv")
        assert float(rows[1]["rel_error"]) >= 0.0


class TestSweep:
    def test_single_cell_sweep(self, tmp_path):
        args = fast_args(tmp_path)
        assert main([*args, "sweep"]) == EXIT_OK
        out = tmp_path / "out"
        assert (out / "eval_P0_M0.csv").exists()
        rows = _read_eval(out / "evaluate_all.csv")
        assert {r["source"] for r in rows} == {"ssfm", "analytical", "nbgd"}

    def test_resumability(self, tmp_path, capsys):
        args = fast_args(tmp_path)
        main([*args, "sweep"])
        capsys.readouterr()
        cell = tmp_path / "out" / "eval_P0_M0.csv"
        stamp = cell.stat().st_mtime_ns
        main([*args, "sweep"])
        assert "skip" in capsys.readouterr().out
        assert cell.stat().st_mtime_ns == stamp
        cell.unlink()
        main([*args, "sweep"])
        assert cell.exists()


def _read_eval(path):
    with open(path) as f:
        rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
    header, data = rows[0], rows[1:]
    return [dict(zip(header, row)) for row in data]
