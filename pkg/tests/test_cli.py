"""CLI subcommands end to end (in-process)."""

import json

import pytest

from specklecs.cli import main


def test_simulate_then_recover(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    assert main([
        "simulate", "--n", "32", "--m", "14", "--pieces", "2", "--seed", "3",
        "--jumps", "1", "--bits", "5", "--out", str(inst),
    ]) == 0
    assert inst.exists()
    capsys.readouterr()

    assert main([
        "recover", "--instance", str(inst), "--method", "pgd", "--jumps", "1",
        "--bits", "5", "--exact-projection",
    ]) == 0
    out = capsys.readouterr().out
    assert "objective" in out
    assert "psnr_db" in out  # instance file carries the truth
    assert "termination" in out


def test_recover_approx_projection_flag(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    main(["simulate", "--n", "24", "--m", "10", "--pieces", "2", "--seed", "4",
          "--jumps", "1", "--bits", "5", "--out", str(inst)])
    capsys.readouterr()
    assert main([
        "recover", "--instance", str(inst), "--method", "pgd", "--jumps", "1",
        "--bits", "5", "--approx-projection",
    ]) == 0
    assert "objective" in capsys.readouterr().out


def test_recover_multilevel_method(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    main(["simulate", "--n", "24", "--m", "10", "--pieces", "2", "--seed", "5",
          "--jumps", "1", "--bits", "5", "--out", str(inst)])
    capsys.readouterr()
    assert main([
        "recover", "--instance", str(inst), "--method", "multilevel",
        "--pieces", "2", "--jumps", "1", "--bits", "5",
    ]) == 0
    assert "termination budget" in capsys.readouterr().out


def test_experiment_from_config(tmp_path, capsys):
    cfg = {
        "n": 32,
        "pieces": 2,
        "m_list": [12],
        "trials": 1,
        "methods": ["pgd"],
        "code_bits": 5,
        "seed": 1,
        "pgd_options": {"max_iters": 15},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "results"
    assert main([
        "experiment", "--config", str(cfg_path), "--out", str(out_dir), "--no-figures", "--quiet",
    ]) == 0
    assert (out_dir / "rows.csv").exists()
    assert (out_dir / "summary.csv").exists()
    assert (out_dir / "plot_results.py").exists()


def test_bound_table_and_csv(tmp_path, capsys):
    csv_path = tmp_path / "bound.csv"
    assert main([
        "bound", "--m", "48", "--n", "256", "--rate", "0.176", "--distortion", "1.5e-5",
        "--epsilon", "0.2", "--k", "2", "--csv", str(csv_path),
    ]) == 0
    out = capsys.readouterr().out
    for name in ("gamma", "alpha", "rho1", "rho2", "mse_bound", "sparse_mse_bound_k2"):
        assert name in out
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "quantity,value"
    assert len(lines) >= 9


def test_bound_rejects_hypothesis_violation(tmp_path):
    with pytest.raises(ValueError):
        main(["bound", "--m", "128", "--n", "256", "--rate", "0.2", "--distortion", "1e-4"])


def test_denoise_demo(capsys):
    assert main(["denoise-demo", "--n", "2000", "--trials", "20", "--seed", "2"]) == 0
    out = capsys.readouterr().out
    assert "unstructured |y| denoiser" in out
    assert "constant-signal denoiser" in out
    assert "E[(W/n)^(1/2)]" in out
