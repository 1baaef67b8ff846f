import json
import subprocess
import sys

import pytest

RENEWAL_CFG = """\
env.family = renewal
renewal.mu = geometric:0.5
renewal.trunc_s = 8
kernel.name = state_drift
kernel.kappa = 0.1
seed = 12
experiment.n = 120
"""

BOOLEAN_CFG = """\
env.family = boolean
boolean.lambda = 0.1
boolean.beta = 4.0
boolean.rho0 = 1.0
boolean.rho_max = 8.0
boolean.trunc_s = 16
kernel.name = lazy_srw
seed = 5
"""


def run_cli(*argv):
    proc = subprocess.run([sys.executable, "-m", "rwdelab.cli", *argv],
                          capture_output=True, text=True)
    return proc


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture()
def ren_cfg(tmp_path):
    p = tmp_path / "ren.cfg"
    p.write_text(RENEWAL_CFG)
    return p


@pytest.fixture()
def bool_cfg(tmp_path):
    p = tmp_path / "bool.cfg"
    p.write_text(BOOLEAN_CFG)
    return p


def test_blocks_roundtrip(ren_cfg, tmp_path):
    out = tmp_path / "o"
    proc = run_cli("blocks", "--config", str(ren_cfg), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    rows = (out / "blocks_rows.csv").read_text().splitlines()
    assert rows[0] == "index,seed,duration,disp,censored,rejections"
    assert len(rows) == 121
    summary = json.loads((out / "blocks_summary.json").read_text())
    assert summary["n_blocks"] == 120
    assert "speed" in summary and "clt_cov" in summary
    assert (out / "meta.json").exists()


def test_exit_codes(ren_cfg, tmp_path):
    assert run_cli("nosuch", "--config", str(ren_cfg)).returncode == 5
    bad = tmp_path / "bad.cfg"
    bad.write_text("env.family = renewal\n")  # missing required keys
    assert run_cli("blocks", "--config", str(bad),
                   "--out", str(tmp_path / "x")).returncode == 2
    missing = run_cli("blocks", "--config", str(tmp_path / "absent.cfg"),
                      "--out", str(tmp_path / "y"))
    assert missing.returncode == 2


def test_check_failure_exit(ren_cfg, tmp_path):
    cfg = tmp_path / "chk.cfg"
    # an unattainable censoring threshold must trip the --check gate
    cfg.write_text(RENEWAL_CFG + "experiment.max_censored_fraction = -0.5\n")
    proc = run_cli("blocks", "--config", str(cfg), "--out", str(tmp_path / "o"),
                   "--check")
    assert proc.returncode == 3
    assert "censored_fraction_ok" in proc.stderr


def test_mj_check(bool_cfg, tmp_path):
    cfg = tmp_path / "mj.cfg"
    cfg.write_text(BOOLEAN_CFG + "experiment.n_instances = 40\n")
    out = tmp_path / "mo"
    proc = run_cli("mj", "--config", str(cfg), "--out", str(out), "--check")
    assert proc.returncode == 0, proc.stderr
    summary = json.loads((out / "mj_summary.json").read_text())
    assert summary["mismatches"] == 0 and summary["checks"]["dp_matches_brute"]


def test_qk_and_plots(bool_cfg, tmp_path):
    cfg = tmp_path / "qk.cfg"
    cfg.write_text(BOOLEAN_CFG + "experiment.k = 1\nexperiment.n = 300\n")
    out = tmp_path / "qo"
    proc = run_cli("qk", "--config", str(cfg), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    rows = (out / "qk_rows.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[0].startswith("k,scale")


def test_simulate_with_reference(ren_cfg, tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(RENEWAL_CFG + "experiment.t_final = 400\nexperiment.n_runs = 8\n"
                   "experiment.reference_speed = 0.0\n")
    out = tmp_path / "so"
    proc = run_cli("simulate", "--config", str(cfg), "--out", str(out), "--plots")
    assert proc.returncode == 0, proc.stderr
    assert (out / "simulate_standardized.svg").exists()


def test_seed_override_changes_artifacts(ren_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("blocks", "--config", str(ren_cfg), "--out", str(a)).returncode == 0
    assert run_cli("blocks", "--config", str(ren_cfg), "--out", str(b),
                   "--seed", "99").returncode == 0
    assert read(a / "blocks_rows.csv") != read(b / "blocks_rows.csv")


def test_jobs_determinism_blocks(ren_cfg, tmp_path):
    outs = []
    for tag, jobs in (("j1", "1"), ("j4", "4"), ("j1b", "1")):
        out = tmp_path / tag
        proc = run_cli("blocks", "--config", str(ren_cfg), "--out", str(out),
                       "--jobs", jobs)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    for name in ("blocks_rows.csv", "blocks_summary.json"):
        blobs = {read(out / name) for out in outs}
        assert len(blobs) == 1, f"{name} differs across runs/jobs"


def test_help_lists_schemas():
    proc = run_cli("--help")
    assert proc.returncode == 0
    assert "blocks: index,seed,duration" in proc.stdout
    assert "boolean.lambda" in proc.stdout


def test_bundled_check_configs(tmp_path):
    """The bundled configs pass their own --check gates on a correct build."""
    import pathlib

    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    for sub, name, overrides in (("mj", "mj_check.cfg", ["--brute-force"]),
                                 ("blocks", "lln_blocks.cfg", ["--seed", "5"])):
        cfg = tmp_path / name
        text = (root / name).read_text()
        if sub == "blocks":  # trim the block count for test speed
            text = text.replace("experiment.n = 20000", "experiment.n = 2000")
        cfg.write_text(text)
        out = tmp_path / f"{sub}_check"
        proc = run_cli(sub, "--config", str(cfg), "--out", str(out),
                       "--check", *overrides)
        assert proc.returncode == 0, f"{name}: {proc.stderr}"
