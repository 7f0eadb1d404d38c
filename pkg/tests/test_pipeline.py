import json
import time

import pytest

from skillcorpus.model import DatasetManifest, Split, read_corpus
from skillcorpus.pipeline import Config, PipelineError, ingest, run_pipeline


def test_schema_errors_name_the_field(tmp_path):
    with pytest.raises(PipelineError, match="sources"):
        Config.from_dict({"sources": []}, tmp_path)
    with pytest.raises(PipelineError, match="strategy/file_filter"):
        Config.from_dict({"sources": [{"path": "x", "origin": "primary-proprietary"}],
                          "strategy": {"file_filter": "strict"}}, tmp_path)
    with pytest.raises(PipelineError, match="config"):
        Config.load(tmp_path / "missing.toml")


def test_paths_resolve_against_config_dir(mini_copy):
    cfg = Config.load(mini_copy / "config.toml")
    assert cfg.out == (mini_copy / "out").resolve()
    assert all(p.is_dir() for p, _ in cfg.sources)


def test_empty_source_dir(tmp_path):
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "notes.txt").write_text("not skill")
    with pytest.raises(PipelineError, match="no input files"):
        ingest([(tmp_path / "src", Config.from_dict(
            {"sources": [{"path": "src", "origin": "primary-proprietary"}]}, tmp_path).sources[0][1])])
    cfg = Config.from_dict({"sources": [{"path": "src", "origin": "primary-proprietary"}]}, tmp_path)
    with pytest.raises(PipelineError, match=r"\[ingest\] no input files"):
        run_pipeline(cfg)


def test_end_to_end_and_rerun(mini_copy):
    cfg = Config.load(mini_copy / "config.toml")
    t0 = time.perf_counter()
    first = run_pipeline(cfg)
    assert time.perf_counter() - t0 < 10
    assert first.skipped == [] and "export-mlm" in first.executed
    m = first.manifest
    assert m.pair_counts(Split.VAL) == m.pair_counts(Split.TEST)
    assert set(m.exports) == {"vocab.txt", "mlm.jsonl", "seq2seq.jsonl"}
    for name in ("ingested", "cleaned", "linted", "mined", "filtered", "split", "mlm", "seq2seq", "manifest"):
        assert (cfg.out / f"{name}.jsonl").exists()

    second = run_pipeline(cfg)
    assert second.executed == [] and second.skipped == first.executed
    assert second.manifest.digest() == m.digest()
    assert second.outputs == first.outputs


def test_edit_reruns_downstream_only(mini_copy):
    cfg = Config.load(mini_copy / "config.toml")
    run_pipeline(cfg)
    toml = (mini_copy / "config.toml").read_text().replace("vocab_size = 4000", "vocab_size = 3000")
    (mini_copy / "config.toml").write_text(toml)
    res = run_pipeline(Config.load(mini_copy / "config.toml"))
    assert res.skipped[:6] == ["ingest", "clean", "lint", "mine", "filter", "split"]
    assert res.executed[0] == "train-tokenizer"

    (cfg.out / "mlm.jsonl").write_text("tampered\n")
    res = run_pipeline(Config.load(mini_copy / "config.toml"))
    # regenerated byte-identical, so nothing downstream reruns
    assert res.executed == ["export-mlm"]
    assert (cfg.out / "mlm.jsonl").read_text() != "tampered\n"


def test_strategy_without_mlm(mini_copy):
    text = (mini_copy / "config.toml").read_text().replace("self_supervised = true", "self_supervised = false")
    (mini_copy / "config.toml").write_text(text)
    res = run_pipeline(Config.load(mini_copy / "config.toml"))
    assert "export-mlm" not in res.executed and "mlm.jsonl" not in res.manifest.exports


def test_non_supervised_export_skips_train(mini_copy):
    text = (mini_copy / "config.toml").read_text().replace("supervised = true\n", "supervised = false\n")
    text = text.replace("self_supervised = false", "self_supervised = true")
    (mini_copy / "config.toml").write_text(text)
    cfg = Config.load(mini_copy / "config.toml")
    assert not cfg.strategy.supervised and cfg.strategy.self_supervised
    res = run_pipeline(cfg)

    splits = {json.loads(l)["split"] for l in (cfg.out / "seq2seq.jsonl").read_text().splitlines()}
    assert splits == {"val", "test"}
    assert isinstance(res.manifest, DatasetManifest)
    assert read_corpus(cfg.out / "filtered.jsonl")
