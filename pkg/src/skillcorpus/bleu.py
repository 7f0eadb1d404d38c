"""Unsmoothed sentence BLEU over token sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

from . import kernels
from .tokenizer import SubwordVocab

MAX_ORDER = 4

EMPTY_CANDIDATE = "empty-candidate"
NO_NGRAMS = "no-ngrams"
ZERO_PRECISION = "zero-precision"


@dataclass(frozen=True)
class BleuStats:
    score: float
    precisions: tuple[float, ...]
    matches: tuple[int, ...]
    totals: tuple[int, ...]
    brevity_penalty: float
    flags: frozenset[str] = frozenset()

    def __float__(self) -> float:
        return self.score


def brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    if cand_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def bleu_stats(
    candidate: Sequence[Hashable],
    reference: Sequence[Hashable],
    orders: Sequence[int] = (1, 2, 3, 4),
    use_brevity_penalty: bool = True,
) -> BleuStats:
    if len(reference) == 0:
        raise ValueError("reference must contain at least one token")
    cand, ref = list(candidate), list(reference)
    flags = set()
    if not cand:
        flags.add(EMPTY_CANDIDATE)
    matches, totals, precisions = [], [], []
    for n in orders:
        m, t = kernels.clipped_matches(cand, ref, n)
        matches.append(m)
        totals.append(t)
        if t == 0:
            flags.add(NO_NGRAMS)
            precisions.append(0.0)
        else:
            precisions.append(m / t)
    bp = brevity_penalty(len(cand), len(ref)) if use_brevity_penalty else 1.0
    if any(p == 0.0 for p in precisions):
        if cand and NO_NGRAMS not in flags:
            flags.add(ZERO_PRECISION)
        score = 0.0
    else:
        score = bp * math.exp(math.fsum(math.log(p) for p in precisions) / len(precisions))
    return BleuStats(score, tuple(precisions), tuple(matches), tuple(totals), bp, frozenset(flags))


def bleu(candidate, reference, use_brevity_penalty: bool = True) -> float:
    """Geometric mean of clipped 1..4-gram precisions, times the brevity penalty.

    Any zero precision makes the score 0; nothing is smoothed.
    """
    return bleu_stats(candidate, reference, use_brevity_penalty=use_brevity_penalty).score


def bleu_n(candidate, reference, n: int, use_brevity_penalty: bool = True) -> float:
    """Single clipped n-gram precision, times the brevity penalty."""
    if n < 1:
        raise ValueError("n must be positive")
    return bleu_stats(candidate, reference, orders=(n,), use_brevity_penalty=use_brevity_penalty).score


@dataclass
class CorpusBleu:
    mean: float
    scores: dict[str, float] = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)


def corpus_bleu(
    references: Mapping[str, str],
    predictions: Mapping[str, str],
    vocab: SubwordVocab,
    use_brevity_penalty: bool = True,
) -> CorpusBleu:
    """Per-pair BLEU under ``vocab`` and their arithmetic mean.

    Pairs without a prediction are listed in ``missing`` and left out of
    the mean; predictions for unknown pairs raise.
    """
    unknown = sorted(set(predictions) - set(references))
    if unknown:
        raise ValueError(f"predictions for unknown pairs: {unknown[:5]}")
    scores = {}
    missing = []
    for pid, ref in references.items():
        if pid not in predictions:
            missing.append(pid)
            continue
        scores[pid] = bleu(vocab.encode(predictions[pid]), vocab.encode(ref), use_brevity_penalty)
    mean = math.fsum(scores.values()) / len(scores) if scores else 0.0
    return CorpusBleu(mean, scores, missing)
