import csv
import json
import os
import subprocess
import sys
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lccgen.cli import config as C
from lccgen.cli.main import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main
from lccgen.cli.pipeline import read_pgm, sha256
from lccgen.metrics import load_report

TINY = ["--set", "ae.epochs=2", "--set", "lcc.outer_iters=2", "--set", "gan.iterations=20",
        "--set", "gan.hidden=16", "--set", "data.n=300", "--set", "eval.n_samples=200",
        "--set", "gap.steps=10", "--set", "gap.restarts=1", "--set", "gap.rademacher_draws=2",
        "--set", "gap.n_generated=100", "--set", "gap.hidden=8"]


# -- config

def test_default_config_round_trips():
    cfg = C.ExperimentConfig()
    assert C.parse(C.serialize(cfg)) == cfg


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 31), m=st.integers(2, 256), lr=st.floats(1e-6, 1.0),
       grid=st.lists(st.integers(2, 100), max_size=4), radius=st.one_of(st.none(), st.floats(0.01, 5.0)),
       enabled=st.booleans(), prior=st.sampled_from(["lcc", "gaussian_d"]))
def test_config_round_trip_property(seed, m, lr, grid, radius, enabled, prior):
    cfg = C.ExperimentConfig(seed=seed)
    cfg.lcc.M, cfg.gan.learning_rate, cfg.lcc.capacity_grid = m, lr, tuple(grid)
    cfg.eval.coverage_radius, cfg.gap.enabled, cfg.gan.prior = radius, enabled, prior
    assert C.parse(C.serialize(cfg)) == cfg


def test_parse_comments_and_partial_files():
    cfg = C.parse("# ring run\nseed = 7\n\nlcc.M = 12   # anchors\ngan.phi = identity\n")
    assert cfg.seed == 7 and cfg.lcc.M == 12 and cfg.gan.phi == "identity"
    assert cfg.ae == C.AeSection()


@pytest.mark.parametrize("text", ["lcc.Q = 3", "bogus.M = 3", "lcc.M = three", "gap.enabled = maybe", "nokey"])
def test_parse_errors(text):
    with pytest.raises(C.ConfigError):
        C.parse(text)


def test_validation():
    cfg = C.ExperimentConfig()
    cfg.sampler.d = 9
    with pytest.raises(C.ConfigError):
        cfg.validate()
    cfg = C.ExperimentConfig()
    cfg.data.kind, cfg.data.idx_images = "idx", "/nonexistent/images.idx"
    with pytest.raises(C.ConfigError, match="does not exist"):
        cfg.validate()


# -- command line

def test_d_greater_than_m_rejected_before_any_stage(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["run", "--out", str(out), "--set", "lcc.M=2", "--set", "sampler.d=3"])
    assert code == EXIT_CONFIG
    assert not out.exists()
    assert "exceeds" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.txt")]) == EXIT_CONFIG


def test_stage_order_error_names_missing_file(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["train-gan", "--out", str(out)] + TINY)
    err = capsys.readouterr().err
    assert code == EXIT_STAGE
    assert "stage order" in err and "ae.json" in err
    manifest = (out / "MANIFEST").read_text()
    assert "# failed stage: train-gan" in manifest


def test_sample_before_training(tmp_path, capsys):
    assert main(["sample", "--out", str(tmp_path)]) == EXIT_STAGE
    assert "gan.json" in capsys.readouterr().err


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ring"
    assert main(["run", "--out", str(out), "--seed", "3"] + TINY) == EXIT_OK
    return out


def test_run_writes_all_artifacts(tiny_run):
    for name in ("ae.json", "dictionary.json", "gan.json", "trainlog.jsonl", "metrics.json", "gap.json",
                 "loss_curves.csv", "lcc_trace.csv", "reconstruction_vs_M.csv", "gap_vs_bound.csv", "ae_losses.csv",
                 "config.txt", "MANIFEST"):
        assert (tiny_run / name).is_file(), name
    metrics = json.loads((tiny_run / "metrics.json").read_text())
    assert set(metrics) == {"seed", "train-ae", "learn-lcc", "train-gan", "eval", "gap"}
    assert "wall_clock" not in (tiny_run / "metrics.json").read_text()


def test_manifest_lists_every_artifact_with_its_hash(tiny_run):
    lines = [ln for ln in (tiny_run / "MANIFEST").read_text().splitlines() if not ln.startswith("#")]
    listed = {ln.split("  ", 1)[1]: ln.split("  ", 1)[0] for ln in lines}
    files = {p.relative_to(tiny_run).as_posix() for p in tiny_run.rglob("*") if p.is_file() and p.name != "MANIFEST"}
    assert set(listed) == files
    for name, digest in listed.items():
        assert sha256(tiny_run / name) == digest


def test_config_snapshot_reproduces_run_config(tiny_run):
    cfg = C.load_config(tiny_run / "config.txt")
    assert cfg.seed == 3 and cfg.gan.iterations == 20 and cfg.out == str(tiny_run)


def test_rerun_gives_identical_metrics_json(tiny_run, tmp_path):
    out = tmp_path / "again"
    assert main(["run", "--out", str(out), "--seed", "3"] + TINY) == EXIT_OK
    assert (out / "metrics.json").read_bytes() == (tiny_run / "metrics.json").read_bytes()
    assert (out / "gan.json").read_bytes() == (tiny_run / "gan.json").read_bytes()


def test_sample_emits_n_rows(tiny_run, tmp_path):
    path = tmp_path / "s.csv"
    assert main(["sample", "--out", str(tiny_run), "--n", "64", "--file", str(path), "--seed", "3"] + TINY) == EXIT_OK
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "x1"] and len(rows) == 65


def test_gap_json_satisfies_identities(tiny_run):
    rep = load_report(tiny_run / "gap.json")
    assert rep.identities_hold()
    assert rep.N == 240  # 80% of 300


def test_single_stage_merges_metrics(tiny_run, tmp_path):
    import shutil
    out = tmp_path / "copy"
    shutil.copytree(tiny_run, out)
    assert main(["eval", "--out", str(out), "--seed", "3"] + TINY) == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())
    assert "train-gan" in metrics and "eval" in metrics


def test_eval_on_untrained_generator_collapses(tmp_path):
    out = tmp_path / "untrained"
    args = ["--out", str(out), "--set", "gan.iterations=0", "--set", "gap.enabled=false"]
    assert main(["run"] + args) == EXIT_OK
    assert json.loads((out / "metrics.json").read_text())["eval"]["mode_coverage"] <= 2


def test_digits_run_writes_pgm_grids(tmp_path):
    out = tmp_path / "digits"
    args = ["--out", str(out), "--set", "data.kind=digits8", "--set", "ae.latent_dim=3", "--set", "sampler.d=3",
            "--set", "gap.enabled=false"] + TINY
    assert main(["run"] + args) == EXIT_OK
    img = read_pgm(out / "eval_samples.pgm")
    assert img.shape == (8 * 9 + 1, 8 * 9 + 1)
    assert 0.0 <= json.loads((out / "metrics.json").read_text())["eval"]["diversity_msssim"] <= 1.0
    assert main(["sample", "--n", "10"] + args) == EXIT_OK
    assert (out / "samples.pgm").is_file()


def test_show_config(capsys):
    assert main(["show-config", "--seed", "11", "--set", "lcc.M=5"]) == EXIT_OK
    cfg = C.parse(capsys.readouterr().out)
    assert cfg.seed == 11 and cfg.lcc.M == 5


def test_console_script_and_threads_env(tmp_path):
    env = dict(os.environ, LCCGEN_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "lccgen.cli.main", "run", "--out", str(tmp_path / "p"),
                           "--set", "gap.enabled=false"] + TINY, env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "lccgen.cli.main", "run", "--set", "lcc.M=1"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_CONFIG


def test_sweep_runs_one_process_per_seed(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--seeds", "0,1", "--out", str(out), "--set", "gap.enabled=false"] + TINY) == EXIT_OK
    with open(out / "sweep_summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["seed"] for r in rows] == ["0", "1"]
    assert all(r["exit_status"] == "0" for r in rows)
    assert (out / "seed_1" / "metrics.json").is_file()


@pytest.mark.slow
def test_minimal_ring_config_runs_under_ten_minutes(tmp_path):
    start = time.perf_counter()
    assert main(["run", "--out", str(tmp_path / "ring")]) == EXIT_OK
    assert time.perf_counter() - start < 600
