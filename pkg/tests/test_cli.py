import json
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cauchy_mann import cli
from cauchy_mann.errors import ConfigError, SolverDivergence
from cauchy_mann.experiments import ExperimentConfig, RunManifest, emit_config, parse_config

SMALL = "n1 = 17\nn2 = 13\nmax_iter = 60\nrestart_steps = 100\nrestart_snapshots = [50, 100]\n"


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, cmd, text, *extra, out="out"):
    cfg = write(tmp_path, text)
    return cli.main([cmd, "--config", cfg, "--out", str(tmp_path / out), *extra])


configs = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from(["rectangle", "annulus", "annulus_noisy", "oracle_rates", "semi_convergence"]),
    n1=st.one_of(st.none(), st.integers(3, 500)),
    schedule=st.sampled_from(["identity", "harmonic"]),
    tol=st.floats(1e-12, 1.0),
    mu=st.floats(1.01, 10.0),
    eps=st.one_of(st.none(), st.floats(1e-10, 1.0)),
    restart_every=st.one_of(st.none(), st.integers(1, 1000)),
    snapshots=st.lists(st.integers(1, 10_000), max_size=5).map(tuple),
    eps_grid=st.lists(st.floats(1e-12, 1.0), min_size=1, max_size=6).map(tuple),
    seed=st.integers(0, 2**31),
    smooth=st.booleans(),
    noise_model=st.sampled_from(["per_node", "per_mode", "band_limited"]),
    out_dir=st.text("abcxyz_/-.", min_size=1, max_size=12),
)


@given(configs)
def test_config_round_trip(cfg):
    assert parse_config(emit_config(cfg)) == cfg


def test_defaults_follow_experiments():
    cfg = ExperimentConfig()
    assert cfg.schedule == "harmonic" and cfg.tol == 1e-3 and cfg.restart_every == 50
    assert cfg.snapshots == (5, 10, 25, 50)
    assert cfg.grid_shape() == (257, 193)
    assert ExperimentConfig(experiment="annulus").grid_shape() == (65, 512)


def test_comments_and_bare_words():
    cfg = parse_config("# comment\n\nexperiment = annulus\nschedule = \"identity\"\n")
    assert cfg.experiment == "annulus" and cfg.schedule == "identity"


@pytest.mark.parametrize("text, lineno", [
    ("n1 = 9\nbogus = 1\n", 2),
    ("n1 = 9\nn2 = 9\nn1 = 3\n", 3),
    ("mu = \"three\"\n", 1),
    ("schedule = zigzag\n", 1),
    ("tol = [1, 2\n", 1),
    ("n1 9\n", 1),
    ("snapshots = 5\n", 1),
])
def test_config_errors_have_line_context(text, lineno):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.lineno == lineno
    assert f"line {lineno}" in str(info.value)


def test_semantic_config_errors():
    with pytest.raises(ConfigError):
        parse_config("mu = 0.5\n")
    with pytest.raises(ConfigError):
        parse_config("experiment = oracle_rates\neps_grid = []\n")


def test_exit_code_config(tmp_path, capsys):
    assert run(tmp_path, "rectangle", "bogus = 1\n") == cli.EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err
    assert cli.main(["rectangle", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    assert run(tmp_path, "oracle_rates", "eps_grid = []\n") == cli.EXIT_CONFIG


def test_usage_error_exits_nonzero():
    with pytest.raises(SystemExit) as info:
        cli.main(["rectangle"])
    assert info.value.code == 2


def test_exit_code_solver_failure(tmp_path, monkeypatch):
    def boom(run):
        raise SolverDivergence("no")

    monkeypatch.setitem(cli.COMMANDS, "rectangle", boom)
    assert run(tmp_path, "rectangle", SMALL) == cli.EXIT_SOLVER


def test_exit_code_check_failure(tmp_path, monkeypatch):
    def failing(run):
        run.check("always fails", False)

    monkeypatch.setitem(cli.COMMANDS, "rectangle", failing)
    assert run(tmp_path, "rectangle", SMALL) == cli.EXIT_OK
    assert run(tmp_path, "rectangle", SMALL, "--check") == cli.EXIT_CHECK


def test_rectangle_outputs_and_manifest(tmp_path):
    assert run(tmp_path, "rectangle", SMALL, "--check") == cli.EXIT_OK
    out = tmp_path / "out"
    names = {"history.csv", "history_restart.csv", "snapshots.csv", "snapshots_restart.csv",
             "snapshot_errors.csv", "plot.py", "manifest.json"}
    assert names <= set(os.listdir(out))
    m = json.loads((out / "manifest.json").read_text())
    assert set(m["files"]) == names - {"manifest.json"}
    assert parse_config(m["config"]).n1 == 17
    assert m["info"]["initial_guess"] == "zero"
    manifest = RunManifest(config=m["config"], files=m["files"])
    assert manifest.verify(out) == []
    header = (out / "snapshots.csv").read_text().split("\n")[0]
    assert header.startswith("param,exact_flux,exact_trace,flux_k5,trace_k5")


def test_snapshot_errors_decrease(tmp_path):
    run(tmp_path, "rectangle", SMALL)
    rows = [r.split(",") for r in (tmp_path / "out" / "snapshot_errors.csv").read_text().strip().split("\n")[1:]]
    plain = [float(r[3]) for r in rows if r[0] == "plain"]
    assert len(plain) == 4 and plain == sorted(plain, reverse=True)


def test_restart_every_max_iter_matches_plain(tmp_path):
    text = "n1 = 17\nn2 = 13\nstop = max_iter\nmax_iter = 40\nrestart_every = 40\nrestart_steps = 40\n" \
           "restart_snapshots = [5, 10, 25]\nsnapshots = [5, 10, 25]\n"
    run(tmp_path, "rectangle", text)
    out = tmp_path / "out"
    assert (out / "history.csv").read_bytes() == (out / "history_restart.csv").read_bytes()
    assert (out / "snapshots.csv").read_bytes() == (out / "snapshots_restart.csv").read_bytes()


def test_annulus_outer_resolution(tmp_path):
    run(tmp_path, "annulus", "n1 = 5\nmax_iter = 20\n")
    m = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert m["info"]["outer_nodes"] == 512 and m["info"]["initial_guess"] == "zero"


def test_noisy_run_reproducible(tmp_path):
    text = "n1 = 9\nn2 = 32\nmax_iter = 40\nschedule = identity\nstop = discrepancy\n"
    run(tmp_path, "annulus_noisy", text, out="a")
    run(tmp_path, "annulus_noisy", text, out="b")
    run(tmp_path, "annulus_noisy", text, "--seed", "9", out="c")
    a, b, c = (tmp_path / d for d in "abc")
    for name in os.listdir(a):
        if name.endswith(".csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "noise_f.csv").read_bytes() != (c / "noise_f.csv").read_bytes()
    assert json.loads((c / "manifest.json").read_text())["config"].count("seed = 9") == 1


def test_oracle_rates_tables(tmp_path):
    run(tmp_path, "oracle_rates", "eps_grid = [0.01, 0.001, 0.0001]\n")
    out = tmp_path / "out"
    rows = (out / "stopping_index.csv").read_text().strip().split("\n")
    assert rows[-1].startswith("slope,")
    for p in ("1", "2"):
        assert "err_times_lnk_p" in (out / f"rates_p{p}.csv").read_text()


def test_semi_convergence_check_passes(tmp_path):
    assert run(tmp_path, "semi_convergence", "n_curve = 200\n", "--check") == cli.EXIT_OK
    summary = dict(r.split(",") for r in (tmp_path / "out" / "summary.csv").read_text().strip().split("\n")[1:])
    assert float(summary["err_stop"]) <= 2 * float(summary["err_min"])


def test_full_precision_numbers(tmp_path):
    run(tmp_path, "semi_convergence", "n_curve = 50\n")
    line = (tmp_path / "out" / "error_curve.csv").read_text().split("\n")[2]
    k, err, res = line.split(",")
    assert float(err) == np.float64(err) and len(err.replace("e", "").replace("-", "").replace(".", "")) > 10
