import json

import numpy as np
import pytest

from skewlab import cli, io
from skewlab.pipelines import RUNNERS

SMALL = ["sampler.burn_in=20", "simulate.T=0.05"]


def run(tmp_path, *args, name="out"):
    return cli.main([*args, "--output-dir", str(tmp_path / name), "--jobs", "1"])


def test_simulate_zero_fields_constant_x(tmp_path):
    code = run(tmp_path, "simulate", "--set", "system.f0.name=zero", "--set", "system.f.name=zero",
               "--set", "simulate.xi=[0.4]", *sum((["--set", s] for s in SMALL), []))
    assert code == 0
    _, rows = io.read_csv(tmp_path / "out" / "x.csv")
    assert {float(r[1]) for r in rows} == {0.4}


def test_simulate_twice_is_byte_identical(tmp_path):
    args = ["simulate", *sum((["--set", s] for s in SMALL), [])]
    assert run(tmp_path, *args, name="a") == 0
    assert run(tmp_path, *args, name="b") == 0
    for name in ("x.csv", "y.csv", "x.trj", "y.trj", "eta.mus", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_eps_one_matches_unscaled_integration(tmp_path):
    base = ["simulate", "--set", "system.eps=1", "--set", "simulate.eta=[1,2,20]", "--set", "simulate.T=0.5"]
    assert run(tmp_path, *base, name="fast") == 0
    assert run(tmp_path, *base, "--set", "integrator.frame=slow", name="slow") == 0
    a = io.read_trajectory_bin(tmp_path / "fast" / "x.trj").states
    b = io.read_trajectory_bin(tmp_path / "slow" / "x.trj").states
    assert np.abs(a - b).max() <= 1e-10


def test_manifest_and_replay(tmp_path, capsys):
    assert run(tmp_path, "simulate", *sum((["--set", s] for s in SMALL), [])) == 0
    manifest = io.read_report(tmp_path / "out" / cli.MANIFEST)
    assert manifest["root_seed"] == 0 and manifest["tool_version"]
    assert set(manifest["files"]) == {"x.csv", "y.csv", "x.trj", "y.trj", "eta.mus", "report.txt"}
    assert "simulate" in manifest["job_seeds"] and "total" in manifest["timings"]
    assert cli.main(["replay", str(tmp_path / "out" / cli.MANIFEST), "--jobs", "1"]) == 0
    assert "identical" in capsys.readouterr().out
    # a tampered manifest no longer replays
    text = (tmp_path / "out" / cli.MANIFEST).read_text()
    digest = manifest["files"]["x.csv"]
    (tmp_path / "out" / cli.MANIFEST).write_text(text.replace(digest, "0" * 64))
    assert cli.main(["replay", str(tmp_path / "out" / cli.MANIFEST), "--jobs", "1"]) == 4


def test_config_file_and_errors(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": {"f": {"name": "warp"}}}))
    assert cli.main(["simulate", "--config", str(cfg)]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    assert run(tmp_path, "simulate", "--set", "system.bogus=1") == 2


def test_numerical_failure_exit_code(tmp_path):
    code = run(tmp_path, "simulate", "--set", "system.fast_flow.trap_radius=5", "--set", "sampler.burn_in=20")
    assert code == 3


def test_interrupted_run_leaves_no_manifest(tmp_path, monkeypatch):
    out = tmp_path / "out"
    out.mkdir()
    (out / cli.MANIFEST).write_text("stale")

    def boom(cfg, out, ctx):
        (out / "partial.csv").write_text("x\n")
        raise KeyboardInterrupt

    monkeypatch.setitem(RUNNERS, ("simulate", None), boom)
    with pytest.raises(KeyboardInterrupt):
        run(tmp_path, "simulate")
    assert not (out / cli.MANIFEST).exists()


SIGMA_SMALL = ["sampler.burn_in=20", "estimate.sigma.M=30", "estimate.sigma.n=10",
               "estimate.sigma.green_kubo.T_run=20", "estimate.sigma.green_kubo.T_corr=1",
               "estimate.sigma.green_kubo.chains=2"]


def test_estimate_sigma_zero_f0(tmp_path):
    args = ["estimate", "sigma", "--set", "system.f0.name=zero", *sum((["--set", s] for s in SIGMA_SMALL), [])]
    assert run(tmp_path, *args) == 0
    _, rows = io.read_csv(tmp_path / "out" / "sigma.csv")
    assert [float(r[3]) for r in rows] == [0.0, 0.0]


def test_estimate_F_y_independent_is_exact(tmp_path):
    args = ["estimate", "F", "--set", "system.f.name=tanh_decay", "--set", "system.f.c=2",
            "--set", "estimate.F.T=200", "--set", "estimate.F.chains=10", "--set", "sampler.burn_in=20"]
    assert run(tmp_path, *args) == 0
    _, rows = io.read_csv(tmp_path / "out" / "F.csv")
    x = np.array([float(r[0]) for r in rows])
    F = np.array([float(r[1]) for r in rows])
    np.testing.assert_allclose(F, -2 * np.tanh(x), atol=1e-14)


def test_estimate_ldp_monotone(tmp_path, capsys):
    args = ["estimate", "ldp", "--check", *sum((["--set", s] for s in [
        "sampler.burn_in=20", "estimate.F.T=200", "estimate.F.chains=10", "estimate.ldp.F_T=200",
        "estimate.ldp.n_windows=100", "estimate.ldp.T_grid=[5,10]", "estimate.ldp.x_grid=[[0.0]]",
        "estimate.ldp.window_bound.n_windows=100", "estimate.ldp.window_bound.T=5"]), [])]
    code = run(tmp_path, *args)
    out = capsys.readouterr().out
    assert "PASS monotone_in_a" in out and "PASS zero_beyond_2f" in out
    assert code in (0, 4)


def test_ladder_check_flag(tmp_path, capsys):
    args = ["ladder", "--check", *sum((["--set", s] for s in [
        "sampler.burn_in=20", "ladder.M=40", "ladder.chunk_size=20", "ladder.oracle_count=5",
        "ladder.eps_ladder=[0.5,0.25]", "ladder.T=0.25", "ladder.eval_times=[0.25]", "ladder.sigma=[[60.0]]",
        "ladder.drift_T=200"]), [])]
    code = run(tmp_path, *args)
    out = capsys.readouterr().out
    assert "PASS bounds" in out and "PASS oracle" in out
    # 40 samples cannot resolve KS <= 0.10, so --check reports failure
    assert code == 4
    assert (tmp_path / "out" / "ladder.csv").exists() and (tmp_path / "out" / "marginals.csv").exists()
