"""Config-driven pipeline with digest-cached stages.

Every stage writes its artifacts under the output directory and a small
record in ``stages/<name>.json`` holding the digest of its inputs and
outputs.  A stage whose input digest and output files are unchanged is
skipped on the next run.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import jsonschema

from . import __version__
from .dataset import build_mlm_samples, build_seq2seq_samples, filter_files, make_splits, write_jsonl
from .lint import lint_source
from .model import (
    DatasetManifest,
    FileEntry,
    FileFilter,
    Origin,
    Pair,
    PairEntry,
    SourceFile,
    Split,
    TrainingStrategy,
    bytes_hash,
    content_hash,
    read_corpus,
    write_corpus,
)
from .pairs import mark_top_level, mine_pairs
from .preprocess import dedup_files, prepare, strip_comments
from .tokenizer import DEFAULT_VOCAB_SIZE, SubwordVocab, train_tokenizer

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SKILL_SUFFIXES = (".il", ".ils")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


# -- config -----------------------------------------------------------------

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["sources"],
    "properties": {
        "seed": {"type": "integer"},
        "out": {"type": "string"},
        "sources": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["path", "origin"],
                "properties": {
                    "path": {"type": "string"},
                    "origin": {"enum": [o.value for o in Origin]},
                },
            },
        },
        "strategy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "self_supervised": {"type": "boolean"},
                "file_filter": {"enum": [f.value for f in FileFilter]},
                "keep_comments": {"type": "boolean"},
                "supervised": {"type": "boolean"},
                "deduplicated": {"type": "boolean"},
            },
        },
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"min_pairs": {"type": "integer", "minimum": 1}},
        },
        "split": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tolerance": {"type": "number", "minimum": 0},
                "max_attempts": {"type": "integer", "minimum": 1},
            },
        },
        "tokenizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"vocab_size": {"type": "integer", "minimum": 359}},
        },
        "mlm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "chunk_len": {"type": "integer", "minimum": 2},
                "keep_short": {"type": "boolean"},
            },
        },
        "seq2seq": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_input": {"type": "integer", "minimum": 1},
                "max_output": {"type": "integer", "minimum": 1},
                "max_comment_words": {"type": "integer", "minimum": 0},
            },
        },
    },
}


@dataclass
class Config:
    sources: list[tuple[Path, Origin]]
    out: Path
    seed: int = 0
    strategy: TrainingStrategy = field(default_factory=TrainingStrategy)
    min_pairs: int = 1
    tolerance: float = 0.05
    max_attempts: int = 1000
    vocab_size: int = DEFAULT_VOCAB_SIZE
    chunk_len: int = 512
    keep_short: bool = True
    max_input: int = 1024
    max_output: int = 512
    max_comment_words: int = 150

    @classmethod
    def from_dict(cls, data: Mapping, base: Path = Path(".")) -> Config:
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise PipelineError("config", f"{where}: {e.message}") from None
        strategy = TrainingStrategy.from_dict({**TrainingStrategy().to_dict(), **data.get("strategy", {})})
        sec = lambda name: data.get(name, {})  # noqa: E731
        return cls(
            sources=[((base / s["path"]).resolve(), Origin(s["origin"])) for s in data["sources"]],
            out=(base / data.get("out", "out")).resolve(),
            seed=data.get("seed", 0),
            strategy=strategy,
            min_pairs=sec("filter").get("min_pairs", 1),
            tolerance=sec("split").get("tolerance", 0.05),
            max_attempts=sec("split").get("max_attempts", 1000),
            vocab_size=sec("tokenizer").get("vocab_size", DEFAULT_VOCAB_SIZE),
            chunk_len=sec("mlm").get("chunk_len", 512),
            keep_short=sec("mlm").get("keep_short", True),
            max_input=sec("seq2seq").get("max_input", 1024),
            max_output=sec("seq2seq").get("max_output", 512),
            max_comment_words=sec("seq2seq").get("max_comment_words", 150),
        )

    @classmethod
    def load(cls, path: str | Path) -> Config:
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise PipelineError("config", f"{path}: {e}") from None
        return cls.from_dict(data, path.parent)


# -- stage helpers shared with the CLI -------------------------------------


def discover(root: Path) -> list[Path]:
    return sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in SKILL_SUFFIXES)


def ingest(sources: Sequence[tuple[Path, Origin]]) -> list[SourceFile]:
    """Read every .il/.ils file below each source root."""
    files = []
    for root, origin in sources:
        if not root.is_dir():
            raise PipelineError("ingest", f"source directory {root} does not exist")
        for p in discover(root):
            text = p.read_bytes().decode("utf-8", errors="replace")
            files.append(SourceFile.from_text(text, origin, p.relative_to(root).as_posix()))
    if not files:
        raise PipelineError("ingest", "no input files (.il/.ils) found in the configured sources")
    return files


def clean(files: Sequence[SourceFile]) -> list[SourceFile]:
    return dedup_files(prepare(f) for f in files)


def lint_all(files: Sequence[SourceFile]) -> list[SourceFile]:
    return [lint_source(f) for f in files]


def mine(files: Sequence[SourceFile]) -> DatasetManifest:
    """Unsplit manifest carrying every mined pair with its top-level flag."""
    pairs: list[Pair] = []
    for f in files:
        pairs.extend(mine_pairs(f))
    pairs = mark_top_level(pairs)
    m = DatasetManifest()
    for f in files:
        m.files[f.id] = FileEntry(f.origin, f.path)
    for p in pairs:
        m.pairs[p.id] = PairEntry.of(p)
    return m


def manifest_pairs(manifest: DatasetManifest, corpus: Mapping[str, SourceFile]) -> list[Pair]:
    missing = sorted({e.file_id for e in manifest.pairs.values()} - set(corpus))
    if missing:
        raise ValueError(f"manifest references {len(missing)} file(s) absent from the corpus, e.g. {missing[0]}")
    return [e.to_pair(pid, corpus[e.file_id].text) for pid, e in manifest.pairs.items()]


def select_files(
    files: Sequence[SourceFile], mined: DatasetManifest, strategy: TrainingStrategy, min_pairs: int = 1
) -> list[SourceFile]:
    """Files passing the strategy's filter, texts untouched so mined spans stay valid."""
    counts: dict[str, int] = {}
    for e in mined.pairs.values():
        counts[e.file_id] = counts.get(e.file_id, 0) + 1
    keep = TrainingStrategy(**{**strategy.__dict__, "keep_comments": True})
    return filter_files(files, keep, {f.id: counts.get(f.id, 0) for f in files}, min_pairs)


def split(
    files: Sequence[SourceFile], mined: DatasetManifest, cfg_seed: int, strategy: TrainingStrategy,
    tolerance: float = 0.05, max_attempts: int = 1000,
) -> DatasetManifest:
    index = {f.id: f for f in files}
    pairs = [e.to_pair(pid, index[e.file_id].text) for pid, e in mined.pairs.items() if e.file_id in index]
    return make_splits(
        files, pairs, cfg_seed, strategy, tolerance, max_attempts, dedup_train=strategy.deduplicated
    )


def train_texts(files: Sequence[SourceFile], manifest: DatasetManifest, keep_comments: bool = True) -> list[SourceFile]:
    train = set(manifest.file_ids(Split.TRAIN))
    out = [f for f in files if f.id in train]
    if not keep_comments:
        out = [f.with_text(strip_comments(f.text)) for f in out]
    return out


# -- runner -----------------------------------------------------------------


@dataclass
class RunResult:
    manifest: DatasetManifest
    executed: list[str]
    skipped: list[str]
    outputs: dict[str, str]


class _Runner:
    def __init__(self, out: Path):
        self.out = out
        self.stage_dir = out / "stages"
        self.stage_dir.mkdir(parents=True, exist_ok=True)
        self.digests: dict[str, str] = {}
        self.executed: list[str] = []
        self.skipped: list[str] = []

    def _record_path(self, name: str) -> Path:
        return self.stage_dir / f"{name}.json"

    def stage(self, name: str, params: Mapping, inputs: Sequence[str], fn: Callable[[], Sequence[str]]) -> None:
        """Run ``fn`` unless its inputs are unchanged and its outputs intact.

        ``fn`` returns the artifact file names it wrote, relative to out.
        """
        key = content_hash(
            json.dumps(
                {
                    "stage": name,
                    "version": __version__,
                    "params": params,
                    "inputs": {i: self.digests[i] for i in inputs},
                },
                sort_keys=True,
                default=str,
            )
        )
        rec_path = self._record_path(name)
        if rec_path.exists():
            rec = json.loads(rec_path.read_text())
            outs = rec.get("outputs", {})
            if rec.get("key") == key and all(
                (self.out / n).exists() and bytes_hash((self.out / n).read_bytes()) == d for n, d in outs.items()
            ):
                self.digests.update(outs)
                self.skipped.append(name)
                return
        try:
            names = fn()
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError(name, f"{type(e).__name__}: {e}") from e
        outs = {n: bytes_hash((self.out / n).read_bytes()) for n in names}
        rec_path.write_text(json.dumps({"key": key, "outputs": outs}, sort_keys=True, indent=1) + "\n")
        self.digests.update(outs)
        self.executed.append(name)


def run_pipeline(cfg: Config) -> RunResult:
    """ingest, clean, lint, mine, filter, split, tokenizer, exports, manifest."""
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    r = _Runner(out)
    st = cfg.strategy

    source_listing = []
    for root, origin in cfg.sources:
        if not root.is_dir():
            raise PipelineError("ingest", f"source directory {root} does not exist")
        for p in discover(root):
            source_listing.append((str(root), origin.value, p.relative_to(root).as_posix(), bytes_hash(p.read_bytes())))

    def do_ingest():
        write_corpus(ingest(cfg.sources), out / "ingested.jsonl")
        return ["ingested.jsonl"]

    r.stage("ingest", {"sources": source_listing}, [], do_ingest)

    def do_clean():
        write_corpus(clean(read_corpus(out / "ingested.jsonl")), out / "cleaned.jsonl")
        return ["cleaned.jsonl"]

    r.stage("clean", {}, ["ingested.jsonl"], do_clean)

    def do_lint():
        write_corpus(lint_all(read_corpus(out / "cleaned.jsonl")), out / "linted.jsonl")
        return ["linted.jsonl"]

    r.stage("lint", {}, ["cleaned.jsonl"], do_lint)

    def do_mine():
        mine(read_corpus(out / "linted.jsonl")).save(out / "mined.jsonl")
        return ["mined.jsonl"]

    r.stage("mine", {}, ["linted.jsonl"], do_mine)

    def do_filter():
        files = read_corpus(out / "linted.jsonl")
        kept = select_files(files, DatasetManifest.load(out / "mined.jsonl"), st, cfg.min_pairs)
        write_corpus(kept, out / "filtered.jsonl")
        return ["filtered.jsonl"]

    r.stage("filter", {"strategy": st.to_dict(), "min_pairs": cfg.min_pairs}, ["linted.jsonl", "mined.jsonl"], do_filter)

    def do_split():
        files = read_corpus(out / "filtered.jsonl")
        m = split(files, DatasetManifest.load(out / "mined.jsonl"), cfg.seed, st, cfg.tolerance, cfg.max_attempts)
        m.save(out / "split.jsonl")
        return ["split.jsonl"]

    split_params = {"seed": cfg.seed, "strategy": st.to_dict(), "tol": cfg.tolerance, "max": cfg.max_attempts}
    r.stage("split", split_params, ["filtered.jsonl", "mined.jsonl"], do_split)

    def do_tokenizer():
        files = train_texts(read_corpus(out / "filtered.jsonl"), DatasetManifest.load(out / "split.jsonl"))
        if not files:
            raise PipelineError("train-tokenizer", "training split is empty")
        train_tokenizer([f.text for f in files], cfg.vocab_size).save(out / "vocab.txt")
        return ["vocab.txt"]

    r.stage("train-tokenizer", {"vocab_size": cfg.vocab_size}, ["filtered.jsonl", "split.jsonl"], do_tokenizer)

    exports = ["vocab.txt"]
    if st.self_supervised:

        def do_mlm():
            files = read_corpus(out / "filtered.jsonl")
            manifest = DatasetManifest.load(out / "split.jsonl")
            vocab = SubwordVocab.load(out / "vocab.txt")
            samples = build_mlm_samples(
                train_texts(files, manifest, st.keep_comments), vocab, cfg.seed, cfg.chunk_len, cfg.keep_short
            )
            write_jsonl((s.to_dict() for s in samples), out / "mlm.jsonl")
            return ["mlm.jsonl"]

        mlm_params = {"seed": cfg.seed, "chunk": cfg.chunk_len, "short": cfg.keep_short, "keep": st.keep_comments}
        r.stage("export-mlm", mlm_params, ["filtered.jsonl", "split.jsonl", "vocab.txt"], do_mlm)
        exports.append("mlm.jsonl")

    def do_seq2seq():
        files = {f.id: f for f in read_corpus(out / "filtered.jsonl")}
        manifest = DatasetManifest.load(out / "split.jsonl")
        vocab = SubwordVocab.load(out / "vocab.txt")
        write_jsonl(
            (s.to_dict() for s in seq2seq_export(manifest, files, vocab, st.supervised, cfg)),
            out / "seq2seq.jsonl",
        )
        return ["seq2seq.jsonl"]

    s2s_params = {
        "supervised": st.supervised,
        "limits": [cfg.max_input, cfg.max_output, cfg.max_comment_words],
    }
    r.stage("export-seq2seq", s2s_params, ["filtered.jsonl", "split.jsonl", "vocab.txt"], do_seq2seq)
    exports.append("seq2seq.jsonl")

    def do_manifest():
        m = DatasetManifest.load(out / "split.jsonl")
        m.exports = {n: r.digests[n] for n in exports}
        m.save(out / "manifest.jsonl")
        return ["manifest.jsonl"]

    r.stage("manifest", {}, ["split.jsonl", *exports], do_manifest)
    return RunResult(DatasetManifest.load(out / "manifest.jsonl"), r.executed, r.skipped, dict(r.digests))


def seq2seq_export(
    manifest: DatasetManifest,
    files: Mapping[str, SourceFile],
    vocab: SubwordVocab,
    include_train: bool = True,
    cfg: Config | None = None,
):
    """Seq2Seq samples for every split pair; train pairs only under supervised training."""
    pairs = [p for p in manifest_pairs(manifest, files) if include_train or manifest.pairs[p.id].split != Split.TRAIN]
    pairs.sort(key=lambda p: (manifest.pairs[p.id].split.value, p.id))
    splits = {p.id: manifest.pairs[p.id].split for p in pairs}
    kw = {}
    if cfg is not None:
        kw = {"max_input": cfg.max_input, "max_output": cfg.max_output, "max_comment_words": cfg.max_comment_words}
    return build_seq2seq_samples(pairs, vocab, splits, **kw)
