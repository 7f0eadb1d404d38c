"""Lossless lexer and structural parser for a practical subset of SKILL.

Both the C-like call syntax (``procedure(f(a) ...)``) and the Lisp syntax
(``(defun f (a) ...)``) are understood.  The parser only recovers the
structure needed for linting and pair mining: procedure definitions,
control constructs, plain statements and comment blocks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import Span

IDENTIFIER = "identifier"
NUMBER = "number"
STRING = "string"
LINE_COMMENT = "line-comment"
BLOCK_COMMENT = "block-comment"
OPEN = "open-delim"
CLOSE = "close-delim"
QUOTE = "quote-mark"
KEYWORD_ARG = "keyword-arg"
OPERATOR = "operator"
PUNCT = "punct"
ERROR = "error"

COMMENT_KINDS = frozenset({LINE_COMMENT, BLOCK_COMMENT})
PAIRS = {"(": ")", "[": "]", "{": "}"}

DEFINITION_KEYWORDS = frozenset({"procedure", "defun", "globalProc", "pcDefinePCell"})

# number of leading header expressions before the body of each construct
CONSTRUCT_HEADERS = {
    "foreach": 2,
    "forall": 2,
    "exists": 2,
    "setof": 2,
    "for": 3,
    "while": 1,
    "if": 1,
    "when": 1,
    "unless": 1,
    "let": 1,
    "let*": 1,
    "prog": 1,
    "case": 1,
    "caseq": 1,
    "cond": 0,
    "progn": 0,
    "begin": 0,
}
LOOP_CONSTRUCTS = frozenset({"foreach", "forall", "exists", "setof", "for", "while"})

_OPERATORS = (
    "->", "~>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "**",
    "=", "+", "-", "*", "/", "<", ">", "!", ":", "|", "&",
)

_LEX = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<line_comment>;[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<open_block>/\*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<open_string>")
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?(?![A-Za-z_]))
  | (?P<keyword_arg>\?[A-Za-z_][A-Za-z0-9_]*)
  | (?P<identifier>[A-Za-z_@][A-Za-z0-9_?@$]*|\d+[A-Za-z_][A-Za-z0-9_]*)
  | (?P<open>[(\[{])
  | (?P<close>[)\]}])
  | (?P<quote>['`])
  | (?P<operator>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + r""")
  | (?P<punct>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_GROUP_KIND = {
    "line_comment": LINE_COMMENT,
    "block_comment": BLOCK_COMMENT,
    "string": STRING,
    "number": NUMBER,
    "keyword_arg": KEYWORD_ARG,
    "identifier": IDENTIFIER,
    "open": OPEN,
    "close": CLOSE,
    "quote": QUOTE,
    "operator": OPERATOR,
    "punct": PUNCT,
}


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    start: int
    end: int

    @property
    def span(self) -> Span:
        return Span(self.start, self.end)

    @property
    def is_comment(self) -> bool:
        return self.kind in COMMENT_KINDS


def lex(text: str) -> list[Token]:
    """Tokenize ``text``; whitespace is skipped but recoverable from spans.

    Unterminated block comments become a single error token running to the
    end of input.  An unterminated string becomes an error token up to the
    end of its line and lexing resumes on the next line.
    """
    tokens: list[Token] = []
    pos, n = 0, len(text)
    match = _LEX.match
    while pos < n:
        m = match(text, pos)
        group = m.lastgroup
        if group == "ws":
            pos = m.end()
            continue
        if group == "open_block":
            tokens.append(Token(ERROR, text[pos:], pos, n))
            break
        if group == "open_string":
            nl = text.find("\n", pos)
            end = n if nl < 0 else nl
            tokens.append(Token(ERROR, text[pos:end], pos, end))
            pos = end
            continue
        end = m.end()
        tokens.append(Token(_GROUP_KIND[group], text[pos:end], pos, end))
        pos = end
    return tokens


def reassemble(tokens: Sequence[Token], gaps: Sequence[str]) -> str:
    """Inverse of :func:`whitespace_gaps`: interleave gaps and token texts."""
    out = [gaps[0]]
    for tok, gap in zip(tokens, gaps[1:]):
        out.append(tok.text)
        out.append(gap)
    return "".join(out)


def whitespace_gaps(text: str, tokens: Sequence[Token]) -> list[str]:
    gaps, prev = [], 0
    for tok in tokens:
        gaps.append(text[prev:tok.start])
        prev = tok.end
    gaps.append(text[prev:])
    return gaps


# -- parsing ----------------------------------------------------------------

PROCEDURE_DEF = "procedure-def"
STATEMENT = "statement"
CONSTRUCT = "construct"
COMMENT_BLOCK = "comment-block"


@dataclass(frozen=True)
class Form:
    kind: str
    span: Span
    name: str | None = None
    params: tuple[str, ...] | None = None
    body_span: Span | None = None
    children: tuple[Form, ...] = ()
    head: str | None = None
    header_span: Span | None = None
    errors: tuple[str, ...] = ()
    # index range into the token list, [first, last)
    tokens: tuple[int, int] = (0, 0)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class _Ctx:
    text_len: int
    tokens: list[Token]
    match: dict[int, int]  # open index -> close index
    errors: dict[int, str] = field(default_factory=dict)


def _match_delimiters(tokens: Sequence[Token]) -> tuple[dict[int, int], dict[int, str]]:
    match: dict[int, int] = {}
    errors: dict[int, str] = {}
    stack: list[int] = []
    for i, tok in enumerate(tokens):
        if tok.kind == OPEN:
            stack.append(i)
        elif tok.kind == CLOSE:
            if not stack:
                errors[i] = f"unmatched closing {tok.text!r}"
                continue
            j = stack.pop()
            if PAIRS[tokens[j].text] != tok.text:
                errors[i] = f"mismatched {tokens[j].text!r} closed by {tok.text!r}"
            match[j] = i
        elif tok.kind == ERROR:
            errors[i] = "unterminated string" if tok.text.startswith('"') else "unterminated block comment"
    for j in stack:
        errors[j] = f"unclosed {tokens[j].text!r}"
    return match, errors


def parse(tokens: Sequence[Token]) -> list[Form]:
    """Group a token stream into top-level forms; never raises."""
    tokens = list(tokens)
    match, errors = _match_delimiters(tokens)
    ctx = _Ctx(tokens[-1].end if tokens else 0, tokens, match, errors)
    return _parse_seq(ctx, 0, len(tokens))


def _group_end(ctx: _Ctx, i: int, hi: int) -> int:
    """Index one past the close of the group opened at ``i`` (bounded by ``hi``)."""
    j = ctx.match.get(i)
    if j is None or j >= hi:
        return hi
    return j + 1


def _skip_comments(ctx: _Ctx, i: int, hi: int) -> int:
    while i < hi and ctx.tokens[i].is_comment:
        i += 1
    return i


def _primary_end(ctx: _Ctx, i: int, hi: int) -> int:
    """End index of the primary expression starting at ``i``."""
    toks = ctx.tokens
    while i < hi and toks[i].kind == QUOTE:
        i += 1
    if i >= hi:
        return hi
    tok = toks[i]
    if tok.kind == OPEN:
        return _group_end(ctx, i, hi)
    if tok.kind == OPERATOR and tok.text in ("-", "!", "+"):
        j = _skip_comments(ctx, i + 1, hi)
        if j < hi and toks[j].kind not in (CLOSE, OPERATOR):
            return _primary_end(ctx, j, hi)
        return i + 1
    i += 1
    # calls and indexing: an open delimiter glued to the previous token
    while i < hi and toks[i].kind == OPEN and toks[i].start == toks[i - 1].end:
        i = _group_end(ctx, i, hi)
    return i


def _statement_end(ctx: _Ctx, i: int, hi: int) -> int:
    toks = ctx.tokens
    if toks[i].kind in (CLOSE, ERROR):
        return i + 1
    end = _primary_end(ctx, i, hi)
    while True:
        j = _skip_comments(ctx, end, hi)
        if j < hi and toks[j].kind == OPERATOR:
            k = _skip_comments(ctx, j + 1, hi)
            if k < hi and toks[k].kind not in (CLOSE, ERROR):
                end = _primary_end(ctx, k, hi)
                continue
            end = j + 1
        break
    return end


def _span(ctx: _Ctx, lo: int, hi: int) -> Span:
    return Span(ctx.tokens[lo].start, ctx.tokens[hi - 1].end)


def _parse_seq(ctx: _Ctx, lo: int, hi: int) -> list[Form]:
    forms: list[Form] = []
    toks = ctx.tokens
    i = lo
    while i < hi:
        if toks[i].is_comment:
            j = i + 1
            while j < hi and toks[j].is_comment:
                j += 1
            forms.extend(_comment_blocks(ctx, i, j))
            i = j
            continue
        j = _statement_end(ctx, i, hi)
        forms.append(_classify(ctx, i, j))
        i = j
    return forms


def _comment_blocks(ctx: _Ctx, lo: int, hi: int) -> list[Form]:
    """Comment tokens lo..hi become one block; the text-aware split happens later."""
    return [
        Form(COMMENT_BLOCK, _span(ctx, lo, hi), tokens=(lo, hi))
    ]


def _collect_errors(ctx: _Ctx, lo: int, hi: int) -> tuple[str, ...]:
    return tuple(msg for i, msg in sorted(ctx.errors.items()) if lo <= i < hi)


def _head_of(ctx: _Ctx, lo: int, hi: int) -> tuple[str | None, int, int]:
    """Return (head, args_lo, args_hi) when [lo, hi) is one call or list."""
    toks = ctx.tokens
    t0 = toks[lo]
    if t0.kind == IDENTIFIER and lo + 1 < hi and toks[lo + 1].kind == OPEN and toks[lo + 1].start == t0.end:
        close = ctx.match.get(lo + 1)
        if close is None or close >= hi:
            return t0.text, lo + 2, hi
        if close == hi - 1:
            return t0.text, lo + 2, hi - 1
        return None, lo, hi
    if t0.kind == OPEN:
        close = ctx.match.get(lo)
        if close is None or close >= hi:
            inner_hi = hi
        elif close == hi - 1:
            inner_hi = close
        else:
            return None, lo, hi
        if t0.text == "{":
            return "{", lo + 1, inner_hi
        k = _skip_comments(ctx, lo + 1, inner_hi)
        if t0.text == "(" and k < inner_hi and toks[k].kind == IDENTIFIER:
            return toks[k].text, k + 1, inner_hi
    return None, lo, hi


def _classify(ctx: _Ctx, lo: int, hi: int) -> Form:
    span = _span(ctx, lo, hi)
    errors = _collect_errors(ctx, lo, hi)
    head, a_lo, a_hi = _head_of(ctx, lo, hi)
    if head in DEFINITION_KEYWORDS:
        form = _procedure(ctx, head, lo, hi, a_lo, a_hi, errors)
        if form is not None:
            return form
    if head is not None and (head in CONSTRUCT_HEADERS or head == "{"):
        nheader = CONSTRUCT_HEADERS.get(head, 0)
        args = _parse_seq(ctx, a_lo, a_hi)
        code_seen = 0
        children = []
        for f in args:
            if f.kind == COMMENT_BLOCK:
                if code_seen >= nheader:
                    children.append(f)
                continue
            code_seen += 1
            if code_seen <= nheader:
                continue
            if head in ("if", "when", "unless") and f.kind == STATEMENT and f.name in ("then", "else"):
                continue
            children.append(f)
        return Form(CONSTRUCT, span, head=head, children=tuple(children), errors=errors, tokens=(lo, hi))
    name = ctx.tokens[lo].text if hi - lo == 1 and ctx.tokens[lo].kind == IDENTIFIER else None
    return Form(STATEMENT, span, name=name, head=head, errors=errors, tokens=(lo, hi))


def _params_from_group(ctx: _Ctx, lo: int, hi: int) -> tuple[str, ...]:
    """Identifiers in a parameter list, skipping @optional/@key/@rest markers."""
    toks = ctx.tokens
    out = []
    i = lo
    while i < hi:
        t = toks[i]
        if t.kind == IDENTIFIER and not t.text.startswith("@"):
            out.append(t.text)
            i += 1
        elif t.kind == OPEN:
            end = _group_end(ctx, i, hi)
            # (name default) pairs
            k = _skip_comments(ctx, i + 1, end)
            if k < end and toks[k].kind == IDENTIFIER:
                out.append(toks[k].text)
            i = end
        else:
            i += 1
    return tuple(out)


def _procedure(ctx, head, lo, hi, a_lo, a_hi, errors) -> Form | None:
    toks = ctx.tokens
    i = _skip_comments(ctx, a_lo, a_hi)
    if i >= a_hi:
        return None
    if head == "pcDefinePCell":
        return _pcell(ctx, lo, hi, i, a_hi, errors)
    name = None
    params_lo = params_hi = None
    header_end = None
    t = toks[i]
    if t.kind == IDENTIFIER:
        name = t.text
        k = _skip_comments(ctx, i + 1, a_hi)
        if k < a_hi and toks[k].kind == OPEN:
            g_end = _group_end(ctx, k, a_hi)
            params_lo, params_hi, header_end = k + 1, g_end - 1, g_end
        else:
            return None
    elif t.kind == OPEN and t.text == "(":
        g_end = _group_end(ctx, i, a_hi)
        k = _skip_comments(ctx, i + 1, g_end)
        if k < g_end and toks[k].kind == IDENTIFIER:
            name = toks[k].text
            params_lo, params_hi, header_end = k + 1, g_end - 1, g_end
        else:
            return None
    else:
        return None
    params = _params_from_group(ctx, params_lo, max(params_lo, params_hi))
    header_span = Span(toks[lo].start, toks[header_end - 1].end)
    return _with_body(ctx, lo, hi, header_end, a_hi, header_span, name, params, head, errors)


def _with_body(ctx, lo, hi, body_lo, body_hi, header_span, name, params, head, errors) -> Form:
    toks = ctx.tokens
    if body_lo < body_hi:
        body_span = Span(toks[body_lo].start, toks[body_hi - 1].end)
        children = tuple(_parse_seq(ctx, body_lo, body_hi))
    else:
        body_span = Span(header_span.end, header_span.end)
        children = ()
    return Form(
        PROCEDURE_DEF,
        _span(ctx, lo, hi),
        name=name,
        params=params,
        body_span=body_span,
        children=children,
        head=head,
        header_span=header_span,
        errors=errors,
        tokens=(lo, hi),
    )


def _pcell(ctx, lo, hi, i, a_hi, errors) -> Form | None:
    """pcDefinePCell(list(lib "cell" "view") ((p default) ...) body...)."""
    toks = ctx.tokens
    args = []
    j = i
    while j < a_hi and len(args) < 2:
        j = _skip_comments(ctx, j, a_hi)
        if j >= a_hi:
            break
        end = _primary_end(ctx, j, a_hi)
        args.append((j, end))
        j = end
    if len(args) < 2:
        return None
    (c_lo, c_hi), (p_lo, p_hi) = args
    # the cell name is the second element of list(lib cell view)
    cell_args = []
    k = c_lo + 2 if c_hi - c_lo > 2 and toks[c_lo + 1].kind == OPEN else c_hi
    while k < c_hi - 1:
        k = _skip_comments(ctx, k, c_hi - 1)
        if k >= c_hi - 1:
            break
        end = _primary_end(ctx, k, c_hi - 1)
        cell_args.append((k, end))
        k = end
    name = None
    if len(cell_args) >= 2 and toks[cell_args[1][0]].kind == STRING:
        name = toks[cell_args[1][0]].text.strip('"')
    if toks[p_lo].kind != OPEN:
        return None
    params = _params_from_group(ctx, p_lo + 1, p_hi - 1)
    header_span = Span(toks[lo].start, toks[p_hi - 1].end)
    return _with_body(ctx, lo, hi, p_hi, a_hi, header_span, name, params, "pcDefinePCell", errors)


# -- text-aware helpers -----------------------------------------------------


def blank_lines_between(text: str, end: int, start: int) -> int:
    """Number of blank lines in text[end:start] (assumed whitespace)."""
    return max(0, text.count("\n", end, start) - 1)


def starts_line(text: str, pos: int) -> bool:
    """True when only whitespace precedes ``pos`` on its line."""
    line_start = text.rfind("\n", 0, pos) + 1
    return text[line_start:pos].strip() == ""


def split_comment_blocks(text: str, tokens: Sequence[Token], forms: Sequence[Form]) -> list[Form]:
    """Split comment-block forms at blank lines and at trailing end-of-line comments.

    A comment that follows code on the same line is kept as its own block.
    """
    out: list[Form] = []
    for f in forms:
        if f.kind != COMMENT_BLOCK:
            if f.children:
                f = _replace_children(f, split_comment_blocks(text, tokens, f.children))
            out.append(f)
            continue
        lo, hi = f.tokens
        start = lo
        for k in range(lo + 1, hi):
            prev, cur = tokens[k - 1], tokens[k]
            if text.count("\n", prev.end, cur.start) >= 2 or not starts_line(text, cur.start):
                out.append(Form(COMMENT_BLOCK, Span(tokens[start].start, prev.end), tokens=(start, k)))
                start = k
        out.append(Form(COMMENT_BLOCK, Span(tokens[start].start, tokens[hi - 1].end), tokens=(start, hi)))
    return out


def _replace_children(f: Form, children: list[Form]) -> Form:
    return Form(
        f.kind, f.span, f.name, f.params, f.body_span, tuple(children),
        f.head, f.header_span, f.errors, f.tokens,
    )


@dataclass(frozen=True)
class Parsed:
    text: str
    tokens: list[Token]
    forms: list[Form]


def parse_text(text: str) -> Parsed:
    tokens = lex(text)
    forms = split_comment_blocks(text, tokens, parse(tokens))
    return Parsed(text, tokens, forms)


@dataclass(frozen=True)
class ProcedureInfo:
    name: str | None
    def_span: Span
    header_span: Span
    body_span: Span
    preceding_comment: Span | None
    form: Form


@dataclass(frozen=True)
class CommentInfo:
    comment_span: Span
    following_form: Form | None


def _sibling_lists(forms: Sequence[Form]):
    yield forms
    for f in forms:
        if f.children:
            yield from _sibling_lists(f.children)


ADJACENCY_BLANK_LINES = 1


def extract_procedures(forms: Sequence[Form], text: str) -> list[ProcedureInfo]:
    """One entry per procedure definition, in source order."""
    out = []
    for siblings in _sibling_lists(forms):
        for idx, f in enumerate(siblings):
            if f.kind != PROCEDURE_DEF:
                continue
            comment = None
            if idx > 0:
                prev = siblings[idx - 1]
                if (
                    prev.kind == COMMENT_BLOCK
                    and starts_line(text, prev.span.start)
                    and blank_lines_between(text, prev.span.end, f.span.start) <= ADJACENCY_BLANK_LINES
                ):
                    comment = prev.span
            out.append(ProcedureInfo(f.name, f.span, f.header_span, f.body_span, comment, f))
    out.sort(key=lambda p: p.def_span.start)
    return out


def extract_comment_blocks(forms: Sequence[Form], text: str) -> list[CommentInfo]:
    """Every comment block with the non-definition form it documents, if any."""
    out = []
    for siblings in _sibling_lists(forms):
        for idx, f in enumerate(siblings):
            if f.kind != COMMENT_BLOCK:
                continue
            following = None
            if idx + 1 < len(siblings) and starts_line(text, f.span.start):
                nxt = siblings[idx + 1]
                if (
                    nxt.kind in (STATEMENT, CONSTRUCT)
                    and not nxt.errors
                    and blank_lines_between(text, f.span.end, nxt.span.start) <= ADJACENCY_BLANK_LINES
                ):
                    following = nxt
            out.append(CommentInfo(f.span, following))
    out.sort(key=lambda c: c.comment_span.start)
    return out


def iter_forms(forms: Sequence[Form]):
    for f in forms:
        yield from f.walk()
