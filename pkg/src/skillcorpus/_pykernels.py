"""Pure-Python hot loops; reference behaviour for the compiled extension."""

from __future__ import annotations


def merge_word(word: list[int], a: int, b: int, new: int) -> list[int]:
    """Replace every non-overlapping (a, b) in ``word``, scanning left to right."""
    out = []
    i, n = 0, len(word)
    while i < n:
        if i + 1 < n and word[i] == a and word[i + 1] == b:
            out.append(new)
            i += 2
        else:
            out.append(word[i])
            i += 1
    return out


def count_pairs(words: list[list[int]], freqs: list[int]) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for word, f in zip(words, freqs):
        for i in range(len(word) - 1):
            key = (word[i], word[i + 1])
            counts[key] = counts.get(key, 0) + f
    return counts


def bpe_word(symbols: list[int], ranks: dict[tuple[int, int], tuple[int, int]]) -> list[int]:
    """Apply ranked merges (pair -> (rank, merged id)) lowest rank first."""
    word = list(symbols)
    while len(word) > 1:
        best = None
        best_rank = -1
        for i in range(len(word) - 1):
            r = ranks.get((word[i], word[i + 1]))
            if r is not None and (best is None or r[0] < best_rank):
                best, best_rank = r, r[0]
                a, b = word[i], word[i + 1]
        if best is None:
            break
        word = merge_word(word, a, b, best[1])
    return word


def ngram_counts(seq: list, n: int) -> dict[tuple, int]:
    counts: dict[tuple, int] = {}
    for i in range(len(seq) - n + 1):
        key = tuple(seq[i:i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


def clipped_matches(cand: list, ref: list, n: int) -> tuple[int, int]:
    """(clipped n-gram matches, candidate n-gram total)."""
    total = len(cand) - n + 1
    if total <= 0:
        return 0, 0
    ref_counts = ngram_counts(ref, n)
    matched = 0
    for key, c in ngram_counts(cand, n).items():
        r = ref_counts.get(key)
        if r:
            matched += c if c < r else r
    return matched, total
