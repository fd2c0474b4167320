import json

import pytest

from floodscope.cli import main
from floodscope.pipeline import load_config, run_pipeline
from floodscope.errors import ConfigError, StageError
from floodscope.synthetic import write_demo_corpus

CONFIG = """
seed = 3
[paths]
tweets = "data/tweets.jsonl"
submissions = "data/submissions/manifest.csv"
out = "out"
[topics.tweet]
k_candidates = [3, 4]
iterations = 60
burn_in = 30
[topics.submission]
k_candidates = [2]
iterations = 60
burn_in = 30
[embed]
d = 64
"""


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    root = tmp_path_factory.mktemp("proj")
    write_demo_corpus(root / "data", n_tweets=120, n_submissions=40, seed=1)
    (root / "run.toml").write_text(CONFIG, encoding="utf-8")
    return root


def run(project, *args, out="out"):
    return main([*args, "--config", str(project / "run.toml"), "--out", str(project / out)])


def test_ingest_only(project, capsys):
    assert run(project, "ingest", out="ingest_only") == 0
    manifest = json.loads((project / "ingest_only" / "manifest.json").read_text())
    assert set(manifest) == {"ingest"}
    assert set(manifest["ingest"]) == {"corpus.jsonl", "ingest_report.json"}
    assert "ingest: 2 file(s)" in capsys.readouterr().out


def test_missing_prerequisite(project, capsys):
    assert run(project, "relevance", out="no_embed") == 3
    assert "missing stage: embed" in capsys.readouterr().err


def test_seed_required(project, tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CONFIG.replace("seed = 3", "").replace('"data/', f'"{project}/data/'), encoding="utf-8")
    assert main(["topics", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "seed" in capsys.readouterr().err
    # ingest does not need one
    assert main(["ingest", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = 1\nbogus = 2\n", encoding="utf-8")
    assert main(["ingest", "--config", str(bad)]) == 2
    bad.write_text('seed = 1\n[paths]\ntweets = "nope.jsonl"\n', encoding="utf-8")
    assert main(["ingest", "--config", str(bad)]) == 2
    assert "not found" in capsys.readouterr().err
    bad.write_text("seed = [", encoding="utf-8")
    assert main(["ingest", "--config", str(bad)]) == 2
    assert main(["no-such-stage"]) == 2


def test_invalid_values_are_config_errors(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[relevance]\nq = 1.5\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(cfg)
    cfg.write_text("[topics.tweet]\nk_candidates = [3]\niterations = 10\nburn_in = 10\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(cfg)


def test_paths_resolve_against_config_dir(project):
    cfg = load_config(project / "run.toml")
    assert cfg.tweets == (project / "data" / "tweets.jsonl").resolve()
    assert cfg.out == (project / "out").resolve()


def test_flags_override_file(project, tmp_path):
    cfg = load_config(project / "run.toml", {"seed": 9, "threads": 2, "out": tmp_path})
    assert cfg.seed == 9 and cfg.threads == 2 and cfg.out == tmp_path.resolve()


def test_run_all_is_reproducible(project):
    assert run(project, "run-all", out="a") == 0
    assert run(project, "run-all", out="b", ) == 0
    a = json.loads((project / "a" / "manifest.json").read_text())
    b = json.loads((project / "b" / "manifest.json").read_text())
    assert a == b
    assert set(a) == {"ingest", "prep", "topics", "keywords", "embed", "relevance", "report"}
    for stage, files in a.items():
        for name in files:
            assert (project / "a" / name).exists(), name


def test_stages_resume_from_disk(project):
    assert run(project, "ingest", "--seed", "3", out="r") == 0
    assert run(project, "prep", out="r") == 0
    assert run(project, "embed", out="r") == 0
    assert run(project, "relevance", out="r") == 0
    manifest = json.loads((project / "r" / "manifest.json").read_text())
    full = json.loads((project / "a" / "manifest.json").read_text())
    assert manifest["relevance"] == full["relevance"]


def test_threads_do_not_change_outputs(project):
    assert main(["run-all", "--config", str(project / "run.toml"), "--out", str(project / "t2"), "--threads", "2"]) == 0
    a = json.loads((project / "a" / "manifest.json").read_text())
    b = json.loads((project / "t2" / "manifest.json").read_text())
    assert a == b


def test_stage_failure_names_stage(project, tmp_path):
    cfg = load_config(project / "run.toml", {"out": tmp_path})
    cfg.min_df = 10_000
    run_pipeline(cfg, {"ingest"})
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, {"prep"})
    assert info.value.stage == "prep"
    assert main(["prep", "--config", str(project / "run.toml"), "--out", str(tmp_path)]) == 0
