import json

from htlab.cli import main


def test_group_validate(capsys, tmp_path):
    assert main(["group", "validate", "heisenberg-2"]) == 0
    assert json.loads(capsys.readouterr().out)["pass"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([[[0, 2], [-2, 0]]]))
    assert main(["group", "validate", str(bad)]) == 1


def test_run_empty_and_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": []}))
    assert main(["--no-cache", "run", str(cfg)]) == 0
    cfg.write_text(json.dumps({"suites": ["algebra", "dyadic"], "output_dir": str(tmp_path / "o")}))
    assert main(["--no-cache", "run", str(cfg)]) == 0
    assert (tmp_path / "o" / "summary.json").exists()
    cfg.write_text(json.dumps({"suites": ["algebra"], "tolerances": {"algebra": 1e-30},
                               "output_dir": str(tmp_path / "o2")}))
    assert main(["--no-cache", "run", str(cfg)]) == 1
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_verify_dyadic(tmp_path):
    assert main(["--no-cache", "verify", "dyadic", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dyadic_theta_2_beta_3_s_2.csv").read_text().startswith("j,ratio")


def test_kernel_command(tmp_path, monkeypatch):
    monkeypatch.setenv("HTLAB_CACHE", str(tmp_path / "cache"))
    out = tmp_path / "k.htk"
    args = ["kernel", "--mult", "mh:gaussian", "--grid", "3,3,32,32", "--out", str(out),
            "--csv", str(tmp_path / "k.csv")]
    assert main(args) == 0
    assert out.exists() and (tmp_path / "k.csv").read_text().startswith("r,rho,re,im")
    assert any(p.name.startswith("kernel-") for p in (tmp_path / "cache").iterdir())
