"""Build and evaluate SKILL code-generation datasets."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .model import DatasetManifest, FileFilter, Origin, Split, TrainingStrategy, read_corpus, write_corpus

log = logging.getLogger("skillcorpus")


def _corpus_arg(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--corpus", type=Path, required=required, help="corpus JSONL (one source file per line)")


def _out(args, default: str = ".") -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_manifest(args) -> DatasetManifest:
    if not args.manifest:
        raise SystemExit("error: --manifest is required")
    return DatasetManifest.load(args.manifest)


def _index(path: Path):
    return {f.id: f for f in read_corpus(path)}


def _strategy(args) -> TrainingStrategy:
    return TrainingStrategy(
        self_supervised=not args.no_self_supervised,
        file_filter=FileFilter(args.file_filter),
        keep_comments=not args.drop_comments,
        supervised=not args.no_supervised,
        deduplicated=not args.no_dedup,
    )


def _strategy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--file-filter", default=FileFilter.NONE.value, choices=[f.value for f in FileFilter])
    p.add_argument("--drop-comments", action="store_true")
    p.add_argument("--no-self-supervised", action="store_true")
    p.add_argument("--no-supervised", action="store_true")
    p.add_argument("--no-dedup", action="store_true")


def _parse_source(spec: str, default_origin: str) -> tuple[Path, Origin]:
    origin, sep, path = spec.partition("=")
    if sep and origin in {o.value for o in Origin}:
        return Path(path), Origin(origin)
    return Path(spec), Origin(default_origin)


# -- commands ---------------------------------------------------------------


def cmd_ingest(args) -> int:
    from .pipeline import ingest

    files = ingest([_parse_source(s, args.origin) for s in args.sources])
    path = _out(args) / "ingested.jsonl"
    write_corpus(files, path)
    print(f"{len(files)} files -> {path}")
    return 0


def cmd_clean(args) -> int:
    from .pipeline import clean, ingest

    src = Path(args.input)
    out = _out(args)
    if src.is_dir():
        files = clean(ingest([(src, Origin(args.origin))]))
        for f in files:
            target = out / f.path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(f.text, encoding="ascii")
    else:
        files = clean(read_corpus(src))
    path = out / "cleaned.jsonl"
    write_corpus(files, path)
    print(f"{len(files)} files -> {path}")
    return 0


def cmd_lint(args) -> int:
    from .lint import lint_file

    items: list[tuple[str, str]] = []
    if args.corpus:
        items += [(f.path, f.text) for f in read_corpus(args.corpus)]
    items += [(str(p), Path(p).read_text(encoding="utf-8", errors="replace")) for p in args.files]
    if not items:
        raise SystemExit("error: give SKILL files or --corpus")
    failed = 0
    reports = []
    for name, text in items:
        rep = lint_file(text)
        failed += not rep.passed
        reports.append({"path": name, **rep.to_dict()})
        if not args.json:
            print(f"{name}: {rep.grade} iq={rep.iq}")
            for f in rep.findings:
                print(f"  {f.rule_id} [{f.span.start}:{f.span.end}] -{f.deduction} {f.message}")
    if args.json:
        print(json.dumps(reports, indent=2, sort_keys=True))
    return 1 if failed else 0


def cmd_mine(args) -> int:
    from .pipeline import clean, ingest, lint_all, mine

    src = Path(args.input)
    if src.is_dir():
        files = lint_all(clean(ingest([(src, Origin(args.origin))])))
        write_corpus(files, _out(args) / "corpus.jsonl")
    else:
        files = read_corpus(src)
    m = mine(files)
    m.seed = args.seed
    target = Path(args.manifest or _out(args) / "mined.jsonl")
    m.save(target)
    counts = m.pair_counts(None)
    print(f"{len(m.pairs)} pairs ({', '.join(f'{k} {v}' for k, v in counts.items())}) -> {target}")
    return 0


def cmd_mine_remote(args) -> int:
    from .miner import FixtureClient, LiveClient, RecordingClient, mine_remote

    client = FixtureClient.load(args.fixtures) if args.fixtures else LiveClient()
    if args.record:
        client = RecordingClient(client)
    corpus = read_corpus(args.tokens_from) if args.tokens_from else []
    res = mine_remote(
        client, corpus, args.query, args.seed, args.min_count, args.fraction, args.workers, args.checkpoint
    )
    digests = res.write(_out(args))
    if args.record:
        client.save(args.record)
    print(f"{len(res.repos)} repos, {len(res.tokens)} tokens, {len(res.files)} files kept, "
          f"{len(res.rejections)} rejected")
    for name, d in sorted(digests.items()):
        print(f"{name} {d}")
    return 0


def cmd_filter(args) -> int:
    from .dataset import filter_files

    files = read_corpus(args.corpus)
    counts = None
    if args.manifest:
        counts = {}
        for e in DatasetManifest.load(args.manifest).pairs.values():
            counts[e.file_id] = counts.get(e.file_id, 0) + 1
        counts = {f.id: counts.get(f.id, 0) for f in files}
    kept = filter_files(files, _strategy(args), counts, args.min_pairs)
    path = _out(args) / "filtered.jsonl"
    write_corpus(kept, path)
    print(f"{len(kept)}/{len(files)} files kept -> {path}")
    return 0


def cmd_split(args) -> int:
    from .pipeline import split

    files = read_corpus(args.corpus)
    m = split(files, _load_manifest(args), args.seed, _strategy(args))
    path = _out(args) / "split.jsonl"
    m.save(path)
    for s in Split:
        print(f"{s.value}: {len(m.file_ids(s))} files, pairs {m.pair_counts(s)}")
    print(f"manifest {m.digest()} -> {path}")
    return 0


def cmd_train_tokenizer(args) -> int:
    from .pipeline import train_texts
    from .tokenizer import train_tokenizer

    files = read_corpus(args.corpus)
    if args.manifest:
        files = train_texts(files, DatasetManifest.load(args.manifest))
    vocab = train_tokenizer([f.text for f in files], args.vocab_size)
    path = _out(args) / "vocab.txt"
    print(f"{len(vocab)} ids, digest {vocab.save(path)} -> {path}")
    return 0


def cmd_export_mlm(args) -> int:
    from .dataset import build_mlm_samples, write_jsonl
    from .pipeline import train_texts
    from .tokenizer import SubwordVocab

    files = read_corpus(args.corpus)
    if args.manifest:
        files = train_texts(files, DatasetManifest.load(args.manifest), not args.drop_comments)
    samples = build_mlm_samples(files, SubwordVocab.load(args.vocab), args.seed, keep_short=not args.drop_short)
    path = _out(args) / "mlm.jsonl"
    print(f"{len(samples)} samples, digest {write_jsonl((s.to_dict() for s in samples), path)} -> {path}")
    return 0


def cmd_export_seq2seq(args) -> int:
    from .dataset import write_jsonl
    from .pipeline import seq2seq_export
    from .tokenizer import SubwordVocab

    samples = seq2seq_export(_load_manifest(args), _index(args.corpus), SubwordVocab.load(args.vocab))
    path = _out(args) / "seq2seq.jsonl"
    print(f"{len(samples)} samples, digest {write_jsonl((s.to_dict() for s in samples), path)} -> {path}")
    return 0


def cmd_bleu(args) -> int:
    from .bleu import bleu_stats

    cand = Path(args.candidate).read_text(encoding="utf-8")
    ref = Path(args.reference).read_text(encoding="utf-8")
    if args.vocab:
        from .tokenizer import SubwordVocab

        vocab = SubwordVocab.load(args.vocab)
        c, r = vocab.encode(cand), vocab.encode(ref)
    else:
        c, r = cand.split(), ref.split()
    orders = (args.n,) if args.n else (1, 2, 3, 4)
    st = bleu_stats(c, r, orders, use_brevity_penalty=not args.no_brevity_penalty)
    print(f"bleu {st.score:.6f}")
    print("precisions " + " ".join(f"{p:.6f}" for p in st.precisions))
    print(f"brevity_penalty {st.brevity_penalty:.6f}")
    if st.flags:
        print("flags " + " ".join(sorted(st.flags)))
    return 0


def cmd_delta_liq(args) -> int:
    from .lint import delta_liq

    m = _load_manifest(args)
    corpus = _index(args.corpus)
    if args.pair_id not in m.pairs:
        raise SystemExit(f"error: unknown pair id {args.pair_id}")
    e = m.pairs[args.pair_id]
    f = corpus[e.file_id]
    pred = Path(args.prediction).read_text(encoding="utf-8")
    print(delta_liq(e.to_pair(args.pair_id, f.text), pred, f))
    return 0


def _evaluate(args):
    from .evaluate import evaluate_predictions, load_predictions
    from .tokenizer import SubwordVocab

    return evaluate_predictions(
        load_predictions(args.predictions), _load_manifest(args), SubwordVocab.load(args.vocab), _index(args.corpus)
    )


def cmd_evaluate(args) -> int:
    report = _evaluate(args)
    path = _out(args) / "report.json"
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.table())
    print(f"-> {path}")
    return 0


def cmd_correlate(args) -> int:
    from .evaluate import correlate, load_human_scores

    res = correlate(load_human_scores(args.scores), _evaluate(args))
    for metric, r in res.coefficients.items():
        print(f"{metric:<10} {'undefined' if r is None else f'{r:+.4f}'}")
    print(f"n={res.n}; excluded pair types: {', '.join(res.excluded_kinds) or 'none'}")
    if res.unmatched:
        print(f"{len(res.unmatched)} score rows without a matching prediction")
    return 0


def cmd_survey_pack(args) -> int:
    from .evaluate import build_survey_pack, load_predictions, pairs_in_split

    pairs = list(pairs_in_split(_load_manifest(args), _index(args.corpus)).values())
    preds: dict[str, dict[str, str]] = {}
    for rec in load_predictions(args.predictions) if args.predictions else []:
        preds.setdefault(rec.model_name, {})[rec.pair_id] = rec.prediction
    shortlist = None
    if args.shortlist:
        shortlist = [ln.strip() for ln in Path(args.shortlist).read_text().splitlines() if ln.strip()]
    pack = build_survey_pack(pairs, preds, shortlist, args.seed)
    for p in pack.write(_out(args)):
        print(p)
    return 0


def cmd_run(args) -> int:
    from .pipeline import Config, run_pipeline

    cfg = Config.load(args.config)
    if args.out:
        cfg.out = Path(args.out).resolve()
    if args.seed is not None:
        cfg.seed = args.seed
    res = run_pipeline(cfg)
    print(f"executed: {', '.join(res.executed) or 'none'}")
    print(f"skipped:  {', '.join(res.skipped) or 'none'}")
    for s in Split:
        print(f"{s.value}: {len(res.manifest.file_ids(s))} files, pairs {res.manifest.pair_counts(s)}")
    print(f"manifest {res.manifest.digest()}")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--manifest", type=Path, help="dataset manifest JSONL")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="skillcorpus", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=fn)
        return p

    origins = [o.value for o in Origin]

    p = add("ingest", cmd_ingest, "read .il/.ils files into a corpus JSONL")
    p.add_argument("sources", nargs="+", help="DIR or ORIGIN=DIR")
    p.add_argument("--origin", default=Origin.PRIMARY.value, choices=origins)

    p = add("clean", cmd_clean, "dedup, strip metadata and normalise comments")
    p.add_argument("input", help="source directory (cleaned files mirrored into --out) or corpus JSONL")
    p.add_argument("--origin", default=Origin.PRIMARY.value, choices=origins)

    p = add("lint", cmd_lint, "grade SKILL files; exit 1 if any fails")
    p.add_argument("files", nargs="*")
    _corpus_arg(p, required=False)
    p.add_argument("--json", action="store_true")

    p = add("mine", cmd_mine, "extract CF/FC/CC pairs into a manifest")
    p.add_argument("input", help="source directory or corpus JSONL")
    p.add_argument("--origin", default=Origin.PRIMARY.value, choices=origins)

    p = add("mine-remote", cmd_mine_remote, "search GitHub for SKILL files")
    p.add_argument("--query", default="cadence skill")
    p.add_argument("--tokens-from", type=Path, help="corpus JSONL used to pick code-search tokens")
    p.add_argument("--fixtures", type=Path, help="replay recorded exchanges instead of the network")
    p.add_argument("--record", type=Path, help="save every exchange to this file")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--workers", type=int, default=4)

    p = add("filter", cmd_filter, "apply a file filter strategy")
    _corpus_arg(p)
    _strategy_args(p)
    p.add_argument("--min-pairs", type=int, default=1)

    p = add("split", cmd_split, "balanced train/val/test split")
    _corpus_arg(p)
    _strategy_args(p)

    p = add("train-tokenizer", cmd_train_tokenizer, "train the subword vocabulary")
    _corpus_arg(p)
    p.add_argument("--vocab-size", type=int, default=8000)

    p = add("export-mlm", cmd_export_mlm, "span-corrupted MLM samples")
    _corpus_arg(p)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--drop-comments", action="store_true")
    p.add_argument("--drop-short", action="store_true", help="discard a trailing partial chunk")

    p = add("export-seq2seq", cmd_export_seq2seq, "input/output samples for every split pair")
    _corpus_arg(p)
    p.add_argument("--vocab", type=Path, required=True)

    p = add("bleu", cmd_bleu, "BLEU of a candidate file against a reference file")
    p.add_argument("candidate")
    p.add_argument("reference")
    p.add_argument("--vocab", type=Path, help="tokenize with this vocabulary (default: whitespace)")
    p.add_argument("-n", type=int, choices=[1, 2, 3, 4], help="single n-gram order")
    p.add_argument("--no-brevity-penalty", action="store_true")

    p = add("delta-liq", cmd_delta_liq, "lint IQ change for one prediction")
    _corpus_arg(p)
    p.add_argument("--pair-id", required=True)
    p.add_argument("--prediction", type=Path, required=True)

    for name, fn, help in (
        ("evaluate", cmd_evaluate, "score a predictions file on the test split"),
        ("correlate", cmd_correlate, "correlate metrics with human scores"),
    ):
        p = add(name, fn, help)
        _corpus_arg(p)
        p.add_argument("--vocab", type=Path, required=True)
        p.add_argument("--predictions", type=Path, required=True)
        if name == "correlate":
            p.add_argument("--scores", type=Path, required=True, help="CSV: pair_id,model_name,score")

    p = add("survey-pack", cmd_survey_pack, "candidate list (stage 1) or survey bundle (stage 2)")
    _corpus_arg(p)
    p.add_argument("--predictions", type=Path)
    p.add_argument("--shortlist", type=Path, help="one pair id per line")

    p = add("run", cmd_run, "run the whole pipeline from a config file")
    p.add_argument("--config", type=Path, required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command != "run" and args.seed is None:
        args.seed = 0
    from .miner import MinerError
    from .pipeline import PipelineError

    try:
        return args.func(args)
    except (PipelineError, MinerError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
