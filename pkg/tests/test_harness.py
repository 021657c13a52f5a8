"""Experiment grid: PSNR metric, fairness, determinism, file contracts."""

import json
import math
import os

import numpy as np
import pytest

from specklecs.harness import (
    METHODS,
    ROWS_HEADER,
    ExperimentConfig,
    canonical_rows_bytes,
    emit_outputs,
    mse_from_psnr,
    per_sample_mse,
    preset_signal,
    psnr,
    run_experiment,
    summarize,
)
from specklecs.compression import encode
from specklecs.measurement import stream


class TestPsnr:
    def test_direct_evaluation(self):
        # peak 1, total squared error 0.01 -> 20 dB
        x = np.array([1.0, 0.5, 0.25, 0.1])
        x_hat = x.copy()
        x_hat[0] += 0.1
        assert psnr(x, x_hat) == pytest.approx(20.0, abs=1e-12)

    def test_exact_recovery_is_inf(self):
        x = np.array([1.0, 2.0])
        assert psnr(x, x.copy()) == math.inf

    def test_scale_invariance(self):
        rng = stream(60)
        x = rng.uniform(0.5, 2.0, 20)
        x_hat = x + rng.normal(0, 0.1, 20)
        base = psnr(x, x_hat)
        for s in (3.0, 0.125):
            assert psnr(s * x, s * x_hat) == pytest.approx(base, rel=1e-12)

    def test_zero_signal_rejected(self):
        with pytest.raises(ValueError):
            psnr(np.zeros(4), np.ones(4))

    def test_mse_roundtrip(self):
        rng = stream(61)
        x = rng.uniform(0.5, 2.0, 32)
        x_hat = x + rng.normal(0, 0.2, 32)
        value = psnr(x, x_hat)
        assert mse_from_psnr(value, x) == pytest.approx(per_sample_mse(x, x_hat), rel=1e-12)
        assert mse_from_psnr(math.inf, x) == 0.0


class TestPresetSignal:
    def test_is_codeword_with_requested_pieces(self):
        cfg = ExperimentConfig(n=128, pieces=4, m_list=(32,), trials=1)
        code = cfg.make_code()
        signal = preset_signal(128, 4, code)
        desc = encode(signal, code)
        assert desc.jump_count == 3

    def test_deterministic(self):
        cfg = ExperimentConfig(n=64, pieces=3, m_list=(16,), trials=1)
        code = cfg.make_code()
        a = preset_signal(64, 3, code)
        b = preset_signal(64, 3, code)
        np.testing.assert_array_equal(a.values, b.values)

    def test_values_within_code_box(self):
        cfg = ExperimentConfig(n=64, pieces=5, m_list=(16,), trials=1)
        code = cfg.make_code()
        signal = preset_signal(64, 5, code)
        lo, hi = code.signal_bounds
        assert signal.values.min() >= lo and signal.values.max() <= hi


class TestConfig:
    def test_defaults_fill_in(self):
        cfg = ExperimentConfig(n=64, pieces=3, m_list=[16, 32], trials=2)
        assert cfg.code_jumps == 2
        assert cfg.methods == METHODS

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=64, pieces=3, m_list=(16,), trials=1, methods=("gradient-descent",))

    def test_m_must_be_undersampled(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n=64, pieces=3, m_list=(64,), trials=1)

    def test_json_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps(
                {"n": 48, "pieces": 2, "m_list": [12], "trials": 1, "methods": ["pgd"], "seed": 3}
            )
        )
        cfg = ExperimentConfig.from_json(path)
        assert cfg.n == 48 and cfg.m_list == (12,)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"n": 48, "pieces": 2, "m_list": [12], "trials": 1, "mlist": [3]})


class TestRunExperiment:
    def tiny_cfg(self, **kw):
        base = dict(
            n=32,
            pieces=2,
            m_list=(12, 16),
            trials=2,
            methods=("pgd",),
            code_bits=5,
            seed=77,
            pgd_options={"max_iters": 25},
        )
        base.update(kw)
        return ExperimentConfig(**base)

    def test_smoke_single_row(self):
        cfg = self.tiny_cfg(m_list=(16,), trials=1)
        rows, summary = run_experiment(cfg)
        assert len(rows) == 1
        row = rows[0]
        assert row.method == "pgd" and row.m == 16 and row.trial == 0
        assert math.isfinite(row.psnr_db)
        assert row.evals > 0

    def test_row_count_and_order(self):
        cfg = self.tiny_cfg(methods=("pgd", "multilevel"))
        rows, summary = run_experiment(cfg)
        assert len(rows) == 2 * 2 * 2
        keys = [(r.method, r.m, r.trial) for r in rows]
        assert keys == sorted(keys)
        assert len(summary) == 4  # one line per (method, m)

    def test_methods_share_instances(self):
        cfg = self.tiny_cfg(methods=("pgd", "multilevel"))
        rows, _ = run_experiment(cfg)
        truth = {}
        for r in rows:
            key = (r.m, r.trial)
            if key in truth:
                assert r.nll_truth == truth[key]
                assert r.seed == truth[key + ("seed",)]
            truth[key] = r.nll_truth
            truth[key + ("seed",)] = r.seed

    def test_deterministic_rows(self, tmp_path):
        cfg = self.tiny_cfg()
        for name in ("a", "b"):
            rows, summary = run_experiment(cfg)
            emit_outputs(rows, summary, tmp_path / name, render=False)
        assert canonical_rows_bytes(tmp_path / "a" / "rows.csv") == canonical_rows_bytes(
            tmp_path / "b" / "rows.csv"
        )


class TestEmitOutputs:
    def test_files_and_header(self, tmp_path):
        cfg = ExperimentConfig(
            n=32, pieces=2, m_list=(12,), trials=2, methods=("pgd",), code_bits=5, seed=5,
            pgd_options={"max_iters": 15},
        )
        rows, summary = run_experiment(cfg)
        paths = emit_outputs(rows, summary, tmp_path / "out", render=True)
        names = {os.path.basename(p) for p in paths}
        assert {"rows.csv", "summary.csv", "plot_results.py", "psnr_vs_m.png", "nll_vs_m.png"} <= names
        lines = (tmp_path / "out" / "rows.csv").read_text().splitlines()
        assert lines[0] == ROWS_HEADER
        assert len(lines) == 1 + len(rows)
        summary_lines = (tmp_path / "out" / "summary.csv").read_text().splitlines()
        assert len(summary_lines) == 1 + len(summary)
        # figures render non-trivially
        assert (tmp_path / "out" / "psnr_vs_m.png").stat().st_size > 1000

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_outputs([], [], tmp_path)


class TestSummarize:
    def test_single_trial_has_zero_spread(self):
        cfg = ExperimentConfig(
            n=32, pieces=2, m_list=(12,), trials=1, methods=("pgd",), code_bits=5, seed=9,
            pgd_options={"max_iters": 15},
        )
        rows, summary = run_experiment(cfg)
        assert summary[0].psnr_ci90_db == 0.0
        assert summary[0].time_std_s == 0.0

    def test_ci_uses_normal_quantile(self):
        from specklecs.harness import ExperimentRow

        rows = [
            ExperimentRow("pgd", 8, t, 1, p, 0.0, 0.0, 0.0, 1) for t, p in enumerate((10.0, 12.0, 14.0))
        ]
        s = summarize(rows)[0]
        expected = 1.645 * np.std([10, 12, 14], ddof=1) / math.sqrt(3)
        assert s.psnr_ci90_db == pytest.approx(expected, rel=1e-12)
