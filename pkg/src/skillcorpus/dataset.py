"""File filters, balanced validation/test splits, MLM and Seq2Seq exports."""

from __future__ import annotations

import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lint import lint_file
from .model import (
    DatasetManifest,
    FileEntry,
    FileFilter,
    Origin,
    Pair,
    PairEntry,
    PairKind,
    SourceFile,
    Split,
    TrainingStrategy,
    bytes_hash,
)
from .pairs import mine_pairs
from .preprocess import strip_comments
from .syntax import BLOCK_COMMENT, LINE_COMMENT, lex
from .tokenizer import EOS_ID, NUM_SENTINELS, SubwordVocab, is_sentinel, sentinel_id

log = logging.getLogger(__name__)

MIN_LINT_IQ = 10
BALANCE_TOLERANCE = 0.05
MAX_PARTITION_ATTEMPTS = 1000

MLM_CHUNK = 512
MLM_NOISE = 0.15
MLM_MEAN_SPAN = 3.0
MLM_MAX_SPAN = 8

MAX_INPUT_IDS = 1024
MAX_OUTPUT_IDS = 512
MAX_COMMENT_WORDS = 150


# -- filtering --------------------------------------------------------------


def filter_files(
    files: Sequence[SourceFile],
    strategy: TrainingStrategy,
    pair_counts: Mapping[str, int] | None = None,
    min_pairs: int = 1,
) -> list[SourceFile]:
    """Subset of ``files`` passing the strategy's file filter.

    ``pair_counts`` maps file id to mined pair count; it is computed when
    the has-pairs filter needs it.  Comments are stripped from survivors
    when the strategy drops them.
    """
    ff = strategy.file_filter
    kept = []
    for f in files:
        if ff in (FileFilter.LINT_PASS, FileFilter.LINT_IQ_GE_10):
            report = f.lint or lint_file(f.text)
            ok = report.passed if ff == FileFilter.LINT_PASS else report.iq >= MIN_LINT_IQ
        elif ff == FileFilter.HAS_PAIRS:
            n = pair_counts[f.id] if pair_counts is not None and f.id in pair_counts else len(mine_pairs(f))
            ok = n >= min_pairs
        else:
            ok = True
        if ok:
            kept.append(f)
    if not strategy.keep_comments:
        kept = [f.with_text(strip_comments(f.text)) for f in kept]
    return kept


# -- splitting --------------------------------------------------------------


class SplitError(RuntimeError):
    pass


def _balanced(a: int, b: int, tol: float) -> bool:
    hi = max(a, b)
    return hi == 0 or abs(a - b) <= tol * hi


def make_splits(
    files: Sequence[SourceFile],
    pairs: Sequence[Pair],
    seed: int,
    strategy: TrainingStrategy | None = None,
    tolerance: float = BALANCE_TOLERANCE,
    max_attempts: int = MAX_PARTITION_ATTEMPTS,
    dedup_train: bool = False,
) -> DatasetManifest:
    """Assign files and pairs to train/val/test.

    ``pairs`` must already carry top-level flags.  Only primary files that
    yield pairs are eligible for validation and test; they are reshuffled
    into halves until the comment-function counts agree within
    ``tolerance``.  Each evaluation split is then balanced to n pairs per
    kind, n being its comment-function count.  With ``dedup_train`` only
    top-level pairs enter the training split.
    """
    rng = random.Random(seed)
    by_file: dict[str, list[Pair]] = defaultdict(list)
    for p in pairs:
        by_file[p.file_id].append(p)

    manifest = DatasetManifest(seed=seed, strategy=strategy or TrainingStrategy())
    for f in files:
        manifest.files[f.id] = FileEntry(f.origin, f.path, Split.TRAIN)

    eligible = [f.id for f in files if f.origin == Origin.PRIMARY and by_file.get(f.id)]
    if not any(f.origin == Origin.PRIMARY for f in files):
        log.warning("no primary files: validation and test splits are empty")

    def cf_count(ids):
        return sum(1 for i in ids for p in by_file[i] if p.kind == PairKind.CF and p.top_level)

    val_ids: list[str] = []
    test_ids: list[str] = []
    if eligible:
        order = list(eligible)
        for attempt in range(1, max_attempts + 1):
            rng.shuffle(order)
            half = (len(order) + 1) // 2
            a, b = order[:half], order[half:]
            if _balanced(cf_count(a), cf_count(b), tolerance):
                val_ids, test_ids = a, b
                break
        else:
            raise SplitError(
                f"could not balance comment-function pairs within {tolerance:.0%} after "
                f"{max_attempts} partitions of {len(order)} primary files "
                f"(per-file CF counts: {sorted(cf_count([i]) for i in order)})"
            )

    for fid in val_ids:
        manifest.files[fid].split = Split.VAL
    for fid in test_ids:
        manifest.files[fid].split = Split.TEST

    for split, ids in ((Split.VAL, val_ids), (Split.TEST, test_ids)):
        chosen = _balance_split([p for i in ids for p in by_file[i]], rng, split)
        for p in chosen:
            manifest.pairs[p.id] = PairEntry.of(p, split)

    for f in files:
        if manifest.files[f.id].split == Split.TRAIN:
            for p in by_file.get(f.id, ()):
                if p.top_level or not dedup_train:
                    manifest.pairs[p.id] = PairEntry.of(p, Split.TRAIN)
    return manifest


def _balance_split(pairs: list[Pair], rng: random.Random, split: Split) -> list[Pair]:
    cf = [p for p in pairs if p.kind == PairKind.CF and p.top_level]
    fc = [p for p in pairs if p.kind == PairKind.FC and p.top_level]
    cc_top = [p for p in pairs if p.kind == PairKind.CC and p.top_level]
    cc_nested = [p for p in pairs if p.kind == PairKind.CC and not p.top_level]

    n = len(cf)
    available = min(len(fc), len(cc_top) + len(cc_nested))
    if available < n:
        log.warning(
            "%s split: only %d FC / %d CC pairs for %d CF pairs; balancing all kinds to %d",
            split.value, len(fc), len(cc_top) + len(cc_nested), n, available,
        )
        n = available
        cf = rng.sample(cf, n)
    fc = rng.sample(fc, n)
    if len(cc_top) >= n:
        cc = rng.sample(cc_top, n)
    else:
        cc = cc_top + rng.sample(cc_nested, n - len(cc_top))
    return sorted(cf + fc + cc, key=lambda p: p.id)


# -- MLM --------------------------------------------------------------------


@dataclass(frozen=True)
class MlmSample:
    corrupted_ids: tuple[int, ...]
    target_ids: tuple[int, ...]
    sources: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "corrupted_ids": list(self.corrupted_ids),
            "target_ids": list(self.target_ids),
            "sources": list(self.sources),
        }


def _truncated_geometric_p(mean: float, cap: int) -> float:
    """Success probability whose geometric law truncated to [1, cap] has ``mean``."""

    def tmean(p):
        q = 1 - p
        ks = np.arange(1, cap + 1)
        w = p * q ** (ks - 1)
        return float((ks * w).sum() / w.sum())

    lo, hi = 1e-9, 1.0
    if mean >= (cap + 1) / 2:
        return lo
    for _ in range(200):
        mid = (lo + hi) / 2
        if tmean(mid) > mean:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def span_length_probs(mean: float = MLM_MEAN_SPAN, cap: int = MLM_MAX_SPAN) -> np.ndarray:
    p = _truncated_geometric_p(mean, cap)
    ks = np.arange(1, cap + 1)
    w = p * (1 - p) ** (ks - 1)
    return w / w.sum()


def corrupt_chunk(
    chunk: Sequence[int],
    rng: np.random.Generator,
    noise: float = MLM_NOISE,
    mean_span: float = MLM_MEAN_SPAN,
    max_span: int = MLM_MAX_SPAN,
    probs: np.ndarray | None = None,
) -> tuple[list[int], list[int], list[tuple[int, int]]]:
    """Mask non-adjacent spans of ``chunk`` and return (corrupted, targets, spans)."""
    length = len(chunk)
    n_spans = max(1, round(noise * length / mean_span))
    n_spans = min(n_spans, NUM_SENTINELS - 1, (length + 1) // 2)
    if probs is None:
        probs = span_length_probs(mean_span, max_span)
    lengths = (rng.choice(len(probs), size=n_spans, p=probs) + 1).tolist()
    # keep room for at least one unmasked token between spans
    while sum(lengths) + n_spans - 1 > length:
        i = int(np.argmax(lengths))
        if lengths[i] > 1:
            lengths[i] -= 1
        else:
            lengths.pop()
            n_spans -= 1
    masked = sum(lengths)
    free = length - masked - (n_spans - 1)
    # distribute free unmasked tokens over n_spans + 1 gaps (stars and bars)
    cuts = np.sort(rng.choice(free + n_spans, size=n_spans, replace=False))
    extra = np.diff(np.concatenate(([-1], cuts, [free + n_spans]))) - 1
    spans = []
    pos = int(extra[0])
    for i, ln in enumerate(lengths):
        spans.append((pos, pos + ln))
        pos += ln + 1 + int(extra[i + 1])
    corrupted: list[int] = []
    targets: list[int] = []
    prev = 0
    for i, (s, e) in enumerate(spans):
        corrupted.extend(chunk[prev:s])
        corrupted.append(sentinel_id(i))
        targets.append(sentinel_id(i))
        targets.extend(chunk[s:e])
        prev = e
    corrupted.extend(chunk[prev:])
    targets.append(sentinel_id(len(spans)))
    return corrupted, targets, spans


def reconstruct(corrupted: Sequence[int], targets: Sequence[int]) -> list[int]:
    """Splice target spans back over their sentinels."""
    fills: dict[int, list[int]] = {}
    current = None
    for t in targets:
        if is_sentinel(t):
            current = t
            fills[current] = []
        elif current is not None:
            fills[current].append(t)
    out: list[int] = []
    for t in corrupted:
        if is_sentinel(t):
            out.extend(fills.get(t, []))
        else:
            out.append(t)
    return out


def token_stream(files: Sequence[SourceFile], vocab: SubwordVocab) -> tuple[list[int], list[str]]:
    """All files tokenized and joined by end-of-sequence; parallel owner ids."""
    ids: list[int] = []
    owners: list[str] = []
    for f in files:
        enc = vocab.encode(f.text) + [EOS_ID]
        ids.extend(enc)
        owners.extend([f.id] * len(enc))
    return ids, owners


def build_mlm_samples(
    files: Sequence[SourceFile],
    vocab: SubwordVocab,
    seed: int,
    chunk_len: int = MLM_CHUNK,
    keep_short: bool = True,
    noise: float = MLM_NOISE,
    mean_span: float = MLM_MEAN_SPAN,
    max_span: int = MLM_MAX_SPAN,
) -> list[MlmSample]:
    """Chunk the concatenated token stream and span-corrupt every chunk.

    Chunks may cross file boundaries; each sample lists the files it
    draws from.  A trailing partial chunk is kept when ``keep_short``.
    """
    ids, owners = token_stream(files, vocab)
    probs = span_length_probs(mean_span, max_span)
    samples = []
    for k, start in enumerate(range(0, len(ids), chunk_len)):
        chunk = ids[start:start + chunk_len]
        if len(chunk) < chunk_len and not keep_short:
            break
        if len(chunk) < 2:
            continue
        rng = np.random.default_rng([seed, k])
        corrupted, targets, _ = corrupt_chunk(chunk, rng, noise, mean_span, max_span, probs)
        sources = tuple(dict.fromkeys(owners[start:start + chunk_len]))
        samples.append(MlmSample(tuple(corrupted), tuple(targets), sources))
    return samples


# -- Seq2Seq ----------------------------------------------------------------


@dataclass(frozen=True)
class Seq2SeqSample:
    pair_id: str
    input_ids: tuple[int, ...]
    output_ids: tuple[int, ...]
    input_text: str
    output_text: str
    split: str | None = None

    def to_dict(self) -> dict:
        d = {
            "pair_id": self.pair_id,
            "input_ids": list(self.input_ids),
            "output_ids": list(self.output_ids),
            "input_text": self.input_text,
            "output_text": self.output_text,
        }
        if self.split is not None:
            d["split"] = self.split
        return d


def truncate_comment_words(text: str, max_words: int = MAX_COMMENT_WORDS) -> str:
    """Keep only the first ``max_words`` whitespace-separated words across all comments."""
    budget = max_words
    out, prev = [], 0
    for tok in lex(text):
        if tok.kind not in (LINE_COMMENT, BLOCK_COMMENT):
            continue
        if tok.kind == BLOCK_COMMENT:
            opener, body, closer = "/*", tok.text[2:-2], "*/"
        else:
            opener, body, closer = "", tok.text, ""
        words = list(_word_spans(body))
        if len(words) <= budget:
            budget -= len(words)
            continue
        out.append(text[prev:tok.start])
        if budget > 0:
            cut = words[budget - 1][1]
            tail = " " if closer else ""
            out.append(opener + body[:cut] + tail + closer)
        prev = tok.end
        budget = 0
    out.append(text[prev:])
    return "".join(out)


def _word_spans(s: str):
    i, n = 0, len(s)
    while i < n:
        while i < n and s[i].isspace():
            i += 1
        if i >= n:
            break
        j = i
        while j < n and not s[j].isspace():
            j += 1
        yield i, j
        i = j


def seq2seq_texts(pair: Pair, max_comment_words: int = MAX_COMMENT_WORDS) -> tuple[str, str]:
    """Model-facing (input, reference output): comment-capped input, comment-free output."""
    return truncate_comment_words(pair.input_text, max_comment_words), strip_comments(pair.output_text)


def build_seq2seq_samples(
    pairs: Sequence[Pair],
    vocab: SubwordVocab,
    splits: Mapping[str, Split | None] | None = None,
    max_input: int = MAX_INPUT_IDS,
    max_output: int = MAX_OUTPUT_IDS,
    max_comment_words: int = MAX_COMMENT_WORDS,
) -> list[Seq2SeqSample]:
    out = []
    for p in pairs:
        inp, outp = seq2seq_texts(p, max_comment_words)
        split = splits.get(p.id) if splits else None
        out.append(
            Seq2SeqSample(
                p.id,
                tuple(vocab.encode(inp)[:max_input]),
                tuple(vocab.encode(outp)[:max_output]),
                inp,
                outp,
                split.value if split is not None else None,
            )
        )
    return out


def write_jsonl(records: Iterable[dict], path: str | Path) -> str:
    """Write records one per line; returns the file digest."""
    data = "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
    raw = data.encode("utf-8")
    Path(path).write_bytes(raw)
    return bytes_hash(raw)


def mlm_stats(samples: Sequence[MlmSample]) -> dict[str, float]:
    """Mean masked fraction and mean span length over samples."""
    fractions, span_lengths = [], []
    for s in samples:
        length = len(reconstruct(s.corrupted_ids, s.target_ids))
        masked = sum(1 for t in s.target_ids if not is_sentinel(t))
        fractions.append(masked / length)
        run = None
        for t in s.target_ids:
            if is_sentinel(t):
                if run:
                    span_lengths.append(run)
                run = 0
            else:
                run += 1
    return {
        "mean_masked_fraction": float(np.mean(fractions)) if fractions else math.nan,
        "mean_span_length": float(np.mean(span_lengths)) if span_lengths else math.nan,
    }
