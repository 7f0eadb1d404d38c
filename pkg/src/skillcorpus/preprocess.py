"""File-level cleaning: dedup, metadata/comment scrubbing, comment rewriting."""

from __future__ import annotations

import bisect
import re
from typing import Iterable, Sequence

from .model import SourceFile, content_hash
from .syntax import BLOCK_COMMENT, LINE_COMMENT, Token, lex

METADATA_PATTERNS = (
    r"disclaimer",
    r"copyright",
    r"\(c\)\s*\d{4}",
    r"liabilit(?:y|ies)",
    r"\bauthors?\b",
    r"[\w.+-]+@[\w-]+\.[\w.-]+",
    r"\bversion\s*:",
    r"\$(?:Id|Revision|Header|Date|Author)\b",
)
COMMENTED_CODE_KEYWORDS = ("printf(", "procedure(", "let(", "setq ")

_ALNUM = re.compile(r"[A-Za-z0-9]")


def dedup_files(files: Iterable[SourceFile]) -> list[SourceFile]:
    """Keep the first file per content hash, preserving order."""
    seen: set[str] = set()
    out = []
    for f in files:
        h = content_hash(f.text)
        if h not in seen:
            seen.add(h)
            out.append(f)
    return out


def comment_body(tok: Token) -> str:
    if tok.kind == LINE_COMMENT:
        return tok.text.lstrip(";")
    return tok.text[2:-2]


def _ascii(s: str) -> str:
    return s.encode("ascii", "ignore").decode("ascii")


def _edit(text: str, edits: Sequence[tuple[int, int, str]]) -> str:
    """Apply non-overlapping (start, end, replacement) edits.

    Lines touched by an edit that end up blank are dropped; trailing
    whitespace on other touched lines is removed.
    """
    if not edits:
        return text
    out = []
    prev = 0
    touched_at = []  # offsets in the output where an edit landed
    length = 0
    for start, end, repl in sorted(edits):
        chunk = text[prev:start]
        out.append(chunk)
        length += len(chunk)
        touched_at.append(length)
        out.append(repl)
        length += len(repl)
        touched_at.append(length)
        prev = end
    out.append(text[prev:])
    edited = "".join(out)

    lines = edited.splitlines(keepends=True)
    touched = set()
    starts = []
    pos = 0
    for ln in lines:
        starts.append(pos)
        pos += len(ln)
    for off in touched_at:
        if off == len(edited) and edited.endswith("\n"):
            continue
        idx = bisect.bisect_right(starts, off) - 1
        if idx >= 0:
            touched.add(idx)
    kept = []
    for i, ln in enumerate(lines):
        if i not in touched:
            kept.append(ln)
            continue
        body = ln.rstrip("\r\n")
        nl = ln[len(body):]
        if body.strip() == "":
            continue
        kept.append(body.rstrip(" \t") + nl)
    return "".join(kept)


def _newlines_only(s: str) -> str:
    return "\n" * s.count("\n")


def _scrub_metadata_block(tok: Token, patterns: Sequence[re.Pattern]) -> str | None:
    """Drop metadata lines inside a block comment; None removes the comment."""
    inner = tok.text[2:-2]
    lines = inner.split("\n")
    kept = [ln for ln in lines if not any(p.search(_ascii(ln)) for p in patterns)]
    if len(kept) == len(lines):
        return tok.text
    if not any(_ALNUM.search(_ascii(ln)) for ln in kept):
        return None
    return "/*" + "\n".join(kept) + "*/"


def _clean_once(text: str, patterns, keywords) -> str:
    # (1) metadata comment lines
    edits = []
    for tok in lex(text):
        if tok.kind == LINE_COMMENT:
            if any(p.search(_ascii(tok.text)) for p in patterns):
                edits.append((tok.start, tok.end, ""))
        elif tok.kind == BLOCK_COMMENT:
            repl = _scrub_metadata_block(tok, patterns)
            if repl is None:
                edits.append((tok.start, tok.end, _newlines_only(tok.text)))
            elif repl != tok.text:
                edits.append((tok.start, tok.end, repl))
    text = _edit(text, edits)

    # (2) commented-out code, (3) blank or decoration-only comments
    edits = []
    for tok in lex(text):
        if tok.kind not in (LINE_COMMENT, BLOCK_COMMENT):
            continue
        body = _ascii(comment_body(tok))
        if any(k in body for k in keywords) or not _ALNUM.search(body):
            edits.append((tok.start, tok.end, _newlines_only(tok.text)))
    text = _edit(text, edits)

    # (4) non-ASCII
    return _ascii(text)


def clean_text(
    text: str,
    metadata_patterns: Sequence[str] = METADATA_PATTERNS,
    code_keywords: Sequence[str] = COMMENTED_CODE_KEYWORDS,
) -> str:
    """Scrub metadata comments, commented-out code, decoration and non-ASCII.

    Steps run to a fixed point so the result is idempotent.
    """
    patterns = [re.compile(p, re.IGNORECASE) for p in metadata_patterns]
    for _ in range(8):
        cleaned = _clean_once(text, patterns, code_keywords)
        if cleaned == text:
            break
        text = cleaned
    return text


def normalize_comments(text: str) -> str:
    """Rewrite every ``;`` line comment as a ``/* ... */`` comment in place."""
    edits = []
    for tok in lex(text):
        if tok.kind == LINE_COMMENT:
            body = tok.text.lstrip(";").replace("*/", "* /")
            edits.append((tok.start, tok.end, f"/*{body} */"))
    if not edits:
        return text
    out, prev = [], 0
    for start, end, repl in edits:
        out.append(text[prev:start])
        out.append(repl)
        prev = end
    out.append(text[prev:])
    return "".join(out)


def strip_comments(code: str) -> str:
    """Remove all comments, dropping lines that the removal leaves empty."""
    edits = [
        (tok.start, tok.end, _newlines_only(tok.text))
        for tok in lex(code)
        if tok.kind in (LINE_COMMENT, BLOCK_COMMENT)
    ]
    return _edit(code, edits)


def prepare(file: SourceFile) -> SourceFile:
    """Clean and comment-normalize a file; the canonical corpus text."""
    return file.with_text(normalize_comments(clean_text(file.text)))
