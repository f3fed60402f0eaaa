import subprocess
import sys

from rsmakit.cli import main


def run_cli(args, **kwargs):
    return subprocess.run(
        [sys.executable, "-m", "rsmakit.cli", *args], capture_output=True, text=True, **kwargs
    )


def test_dof_prints_value():
    res = run_cli(["dof", "--scheme", "rsma", "--metric", "sum", "--csit", "imperfect",
                   "--alpha", "0.5", "--m", "4", "--k", "6"])
    assert res.returncode == 0
    assert res.stdout.strip() == "2.5"


def test_dof_exact_flag():
    res = run_cli(["dof", "--scheme", "rsma", "--metric", "mmf", "--csit", "imperfect",
                   "--alpha", "0.5", "--m", "4", "--k", "6", "--exact"])
    assert res.returncode == 0
    lines = res.stdout.strip().splitlines()
    assert lines[1] == "exact 1/3"


def test_list_recipes_nine_lines():
    res = run_cli(["list-recipes"])
    assert res.returncode == 0
    lines = [l for l in res.stdout.splitlines() if l.strip()]
    assert len(lines) == 9


def test_unknown_recipe_suggestion():
    res = run_cli(["oper-regoin"])
    assert res.returncode == 2
    assert "did you mean 'oper-region'" in res.stderr


def test_unknown_config_key_rejected(tmp_path):
    rc = main(["uplink-region", "--out", str(tmp_path), "--set", "n_fase=3"])
    assert rc == 2


def test_byte_identical_reruns(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["uplink-region", "--out", str(out1), "--set", "n_face=4", "--no-figures"]) == 0
    assert main(["uplink-region", "--out", str(out2), "--set", "n_face=4", "--no-figures"]) == 0
    a = (out1 / "uplink-region.csv").read_bytes()
    b = (out2 / "uplink-region.csv").read_bytes()
    assert a == b


def test_invalid_k_named(tmp_path, capsys):
    rc = main(["solve", "--out", str(tmp_path), "--set", "k=1", "--no-figures"])
    captured = capsys.readouterr()
    assert rc == 2
    assert "K>=2" in captured.err


def test_solve_writes_artifacts(tmp_path):
    rc = main([
        "solve", "--out", str(tmp_path), "--no-figures",
        "--set", "scheme=rsma", "--set", "m=2", "--set", "k=2", "--set", "snr_db=10",
        "--set", "max_iters=40", "--set", "restarts=2",
    ])
    assert rc == 0
    assert (tmp_path / "solve.csv").exists()
    assert (tmp_path / "manifest.txt").exists()
    assert (tmp_path / "resolved-config.txt").exists()
    text = (tmp_path / "solve.csv").read_text()
    assert "objective" in text and "trace" in text


def test_rate_writes_report(tmp_path):
    rc = main([
        "rate", "--out", str(tmp_path), "--no-figures",
        "--set", "scheme=rsma", "--set", "gamma_db=-5", "--set", "theta=1.0",
    ])
    assert rc == 0
    body = (tmp_path / "rate.csv").read_text()
    assert "sum" in body and "min" in body
    assert (tmp_path / "layout.txt").read_text().startswith("scheme one_layer_rs")


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# demo config\n"
        "recipe = uplink-region\n"
        "uplink-region.n_face = 3\n"
        "output.figures = false\n"
    )
    out = tmp_path / "out"
    rc = main(["uplink-region", "--config", str(cfg), "--out", str(out), "--set", "n_face=5"])
    assert rc == 0
    rows = (out / "uplink-region.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 2 + 5  # header + corners + face points
    echoed = (out / "resolved-config.txt").read_text()
    assert "n_face = 5" in echoed


def test_config_recipe_mismatch(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("recipe = dof-slope\n")
    rc = main(["uplink-region", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert rc == 2


def test_infeasible_solve_exit_code(tmp_path):
    rc = main([
        "solve", "--out", str(tmp_path), "--no-figures",
        "--set", "scheme=sdma", "--set", "m=2", "--set", "k=2",
        "--set", "snr_db=-20", "--set", "qos=5.0",
        "--set", "max_iters=30", "--set", "restarts=1",
    ])
    assert rc == 4


def test_figures_rendered_by_default(tmp_path):
    rc = main(["uplink-region", "--out", str(tmp_path), "--set", "n_face=3"])
    assert rc == 0
    assert (tmp_path / "uplink-region.png").exists()


def test_invalid_parameter_range_named(tmp_path, capsys):
    rc = main(["oper-region", "--out", str(tmp_path), "--no-figures",
               "--set", "grid=1", "--set", "rho_grid=0.5", "--set", "gamma_grid=-5",
               "--set", "epsilon=-1"])
    captured = capsys.readouterr()
    assert rc == 2
    assert "epsilon" in captured.err


def test_rate_supports_layered_schemes(tmp_path):
    rc = main([
        "rate", "--out", str(tmp_path), "--no-figures",
        "--set", "scheme=generalized-rs", "--set", "m=3", "--set", "k=3",
        "--set", "seed=4",
    ])
    assert rc == 0
    assert "s123" in (tmp_path / "layout.txt").read_text()


def test_env_var_output_root(tmp_path, monkeypatch):
    import os
    monkeypatch.setenv("RSMAKIT_OUT", str(tmp_path))
    rc = main(["uplink-region", "--set", "n_face=3", "--no-figures"])
    assert rc == 0
    assert (tmp_path / "uplink-region" / "uplink-region.csv").exists()
