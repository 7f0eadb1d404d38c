"""Mine comment-function, function-completion and comment-code pairs."""

from __future__ import annotations

import re
from dataclasses import replace
from typing import Callable, Iterable, Sequence

from .model import Pair, PairKind, SourceFile, Span
from .syntax import COMMENT_BLOCK, Parsed, extract_comment_blocks, extract_procedures, parse_text

LONG_BODY_STATEMENTS = 8
LONG_BODY_TOKENS = 256

_WS = re.compile(r"\s+")


def _default_token_count(text: str) -> int:
    from .syntax import lex

    return len(lex(text))


def mine_pairs(
    file: SourceFile,
    token_count: Callable[[str], int] | None = None,
    parsed: Parsed | None = None,
) -> list[Pair]:
    """Extract every CF, FC and CC pair from a cleaned, comment-normalized file.

    ``token_count`` measures body length for the long-body FC split; it
    defaults to the number of lexical tokens.
    """
    text = file.text
    count = token_count or _default_token_count
    parsed = parsed or parse_text(text)
    pairs: list[Pair] = []

    for proc in extract_procedures(parsed.forms, text):
        body = proc.body_span
        statements = [c for c in proc.form.children if c.kind != COMMENT_BLOCK]
        if not statements or len(body) == 0:
            continue
        if proc.preceding_comment is not None:
            input_span = Span(proc.preceding_comment.start, proc.header_span.end)
            pairs.append(Pair.build(file, PairKind.CF, input_span, body))
            continue
        pairs.append(Pair.build(file, PairKind.FC, proc.header_span, body))
        if len(statements) > 1 and (
            len(statements) > LONG_BODY_STATEMENTS or count(body.slice(text)) > LONG_BODY_TOKENS
        ):
            k = _split_index(statements, body)
            head_end = statements[k - 1].span.end
            rest_start = statements[k].span.start
            # comments between the halves travel with the output
            for c in proc.form.children:
                if c.kind == COMMENT_BLOCK and head_end <= c.span.start < rest_start:
                    rest_start = c.span.start
                    break
            pairs.append(
                Pair.build(
                    file,
                    PairKind.FC,
                    Span(proc.header_span.start, head_end),
                    Span(rest_start, body.end),
                    split_body=True,
                )
            )

    for info in extract_comment_blocks(parsed.forms, text):
        if info.following_form is None:
            continue
        pairs.append(Pair.build(file, PairKind.CC, info.comment_span, info.following_form.span))

    pairs.sort(key=lambda p: (p.input_span.start, p.output_span.start, p.kind.value, p.split_body))
    return pairs


def _split_index(statements, body: Span) -> int:
    """Index k so statements[:k] go to the input; boundary nearest the body midpoint."""
    mid = (body.start + body.end) / 2
    best, best_d = 1, None
    for k in range(1, len(statements)):
        d = abs(statements[k - 1].span.end - mid)
        if best_d is None or d < best_d:
            best, best_d = k, d
    return best


# -- deduplication ----------------------------------------------------------


def normalize_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def combined_text(pair: Pair) -> str:
    """Whitespace-normalized input followed by output, joined as in the source."""
    inp, out = normalize_ws(pair.input_text), normalize_ws(pair.output_text)
    sep = " " if pair.input_span.end < pair.output_span.start else ""
    return f"{inp}{sep}{out}"


_SEP = "\x00"


def mark_top_level(pairs: Sequence[Pair]) -> list[Pair]:
    """Flag each pair as top-level unless its combined text sits inside another pair.

    A pair's combined text is strictly longer than either of its own
    halves, so one substring search over all halves joined by a separator
    that never occurs in cleaned text is equivalent to the pairwise check.
    """
    halves = []
    for p in pairs:
        halves.append(normalize_ws(p.input_text))
        halves.append(normalize_ws(p.output_text))
    haystack = _SEP.join(halves)
    out = []
    for p in pairs:
        needle = combined_text(p)
        contained = _SEP not in needle and needle in haystack
        out.append(replace(p, top_level=not contained) if p.top_level == contained else p)
    return out


def dedup_pairs(pairs: Sequence[Pair]) -> list[Pair]:
    """Keep only top-level pairs."""
    return [p for p in mark_top_level(pairs) if p.top_level]


def top_level_brute_force(pairs: Sequence[Pair]) -> list[bool]:
    """O(n^2) reference for :func:`mark_top_level`."""
    flags = []
    for i, p in enumerate(pairs):
        needle = combined_text(p)
        contained = False
        for j, q in enumerate(pairs):
            if i == j:
                continue
            if needle in normalize_ws(q.input_text) or needle in normalize_ws(q.output_text):
                contained = True
                break
        flags.append(not contained)
    return flags


def mine_corpus(files: Iterable[SourceFile], token_count=None) -> list[Pair]:
    pairs: list[Pair] = []
    for f in files:
        pairs.extend(mine_pairs(f, token_count))
    return mark_top_level(pairs)
