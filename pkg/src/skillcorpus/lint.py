"""Static analysis for SKILL: pass/fail grade, 0-100 IQ score, delta-IQ metric.

The rule table is a fixed stand-in for the proprietary SKILL Lint tool.
Syntactic-error rules fail the file; style and efficiency rules only
lower the IQ.  Every deduction is configurable through :class:`RuleTable`.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Sequence

from .model import Finding, LintReport, Pair, SourceFile, Span
from .syntax import (
    CLOSE,
    CONSTRUCT,
    ERROR,
    IDENTIFIER,
    LOOP_CONSTRUCTS,
    OPEN,
    PROCEDURE_DEF,
    PUNCT,
    Form,
    Token,
    iter_forms,
    parse_text,
)

RULE_TABLE_VERSION = "1"

SYNTAX_RULES = frozenset({"SYN000", "SYN001", "SYN002"})

BUILTINS = frozenset(
    """
    abs append apply car cadr caddr cdr cddr cons eval exp get length list
    load max member min nconc nth print printf println putprop reverse set
    setq sort sprintf sqrt strcat string type assoc mapcar foreach lambda
    """.split()
)


@dataclass(frozen=True)
class RuleTable:
    empty_file: int = 100
    unbalanced: int = 40
    unterminated: int = 40
    long_line: int = 2
    long_line_limit: int = 120
    tab_space_mix: int = 2
    comma_space: int = 1
    shadow_builtin: int = 5
    unused_local: int = 3
    append_in_loop: int = 5
    repeated_subexpr: int = 3
    repeat_threshold: int = 3


DEFAULT_RULES = RuleTable()


def lint_file(text: str, rules: RuleTable = DEFAULT_RULES) -> LintReport:
    """Lint one file; deterministic for identical text."""
    if text.strip() == "":
        f = Finding("SYN000", Span(0, len(text)), rules.empty_file, "empty file")
        return LintReport("fail", 0, (f,))

    parsed = parse_text(text)
    tokens = parsed.tokens
    findings: list[Finding] = []
    findings += _syntax(tokens, rules)
    findings += _long_lines(text, rules)
    findings += _tab_space(text, rules)
    findings += _comma_space(tokens, rules)
    findings += _shadowing(parsed.forms, tokens, rules)
    findings += _unused_locals(parsed.forms, tokens, rules)
    findings += _append_in_loop(parsed.forms, tokens, rules)
    findings += _repeated_subexpr(parsed.forms, tokens, rules)

    findings.sort(key=lambda f: (f.span.start, f.rule_id, f.span.end, f.message))
    iq = max(0, 100 - sum(f.deduction for f in findings))
    grade = "fail" if any(f.rule_id in SYNTAX_RULES for f in findings) else "pass"
    return LintReport(grade, iq, tuple(findings))


def lint_source(file: SourceFile, rules: RuleTable = DEFAULT_RULES) -> SourceFile:
    return file.with_lint(lint_file(file.text, rules))


# -- syntactic class --------------------------------------------------------


def _syntax(tokens: Sequence[Token], rules: RuleTable) -> list[Finding]:
    out = []
    stack: list[Token] = []
    bad: Token | None = None
    pairs = {"(": ")", "[": "]", "{": "}"}
    for tok in tokens:
        if tok.kind == OPEN:
            stack.append(tok)
        elif tok.kind == CLOSE:
            if not stack or pairs[stack.pop().text] != tok.text:
                bad = bad or tok
    if stack and bad is None:
        bad = stack[0]
    if bad is not None:
        out.append(Finding("SYN001", bad.span, rules.unbalanced, "unbalanced delimiters"))
    unterminated = next((t for t in tokens if t.kind == ERROR), None)
    if unterminated is not None:
        what = "string" if unterminated.text.startswith('"') else "block comment"
        out.append(
            Finding("SYN002", unterminated.span, rules.unterminated, f"unterminated {what}")
        )
    return out


# -- style class ------------------------------------------------------------


def _long_lines(text: str, rules: RuleTable) -> list[Finding]:
    pos = 0
    for line in text.split("\n"):
        if len(line) > rules.long_line_limit:
            msg = f"line longer than {rules.long_line_limit} characters"
            return [Finding("STY001", Span(pos, pos + len(line)), rules.long_line, msg)]
        pos += len(line) + 1
    return []


def _tab_space(text: str, rules: RuleTable) -> list[Finding]:
    tab_line = space_line = None
    pos = 0
    for line in text.split("\n"):
        indent = line[: len(line) - len(line.lstrip(" \t"))]
        if indent and line.strip():
            if "\t" in indent and " " in indent:
                tab_line = space_line = pos
            elif "\t" in indent:
                tab_line = pos if tab_line is None else tab_line
            else:
                space_line = pos if space_line is None else space_line
        if tab_line is not None and space_line is not None:
            at = max(tab_line, space_line)
            return [Finding("STY002", Span(at, at), rules.tab_space_mix, "tabs and spaces mixed in indentation")]
        pos += len(line) + 1
    return []


def _comma_space(tokens: Sequence[Token], rules: RuleTable) -> list[Finding]:
    out = []
    depth = 0
    for i, tok in enumerate(tokens):
        if tok.kind == OPEN:
            depth += 1
        elif tok.kind == CLOSE:
            depth = max(0, depth - 1)
        elif tok.kind == PUNCT and tok.text == "," and depth > 0 and i + 1 < len(tokens):
            nxt = tokens[i + 1]
            if nxt.start == tok.end and nxt.kind != CLOSE and nxt.text != "@":
                out.append(Finding("STY003", tok.span, rules.comma_space, "missing space after comma"))
    return out


def _binding_names(form: Form, tokens: Sequence[Token]) -> tuple[list[Token], int] | None:
    """Local variable tokens of a let/prog binding list and the list's close index."""
    lo, hi = form.tokens
    h = lo + 1 if tokens[lo].kind == OPEN else lo
    while h < hi and tokens[h].is_comment:
        h += 1
    if h >= hi or tokens[h].text != form.head:
        return None
    i = h + 1
    if tokens[lo].kind == IDENTIFIER:
        i += 1  # the call's own open delimiter
    while i < hi and tokens[i].is_comment:
        i += 1
    if i >= hi or tokens[i].kind != OPEN:
        return None
    names = []
    depth = 0
    j = i
    while j < hi:
        t = tokens[j]
        if t.kind == OPEN:
            depth += 1
            if depth == 2 and j + 1 < hi and tokens[j + 1].kind == IDENTIFIER:
                names.append(tokens[j + 1])
        elif t.kind == CLOSE:
            depth -= 1
            if depth == 0:
                break
        elif t.kind == IDENTIFIER and depth == 1:
            names.append(t)
        j += 1
    return names, j


def _shadowing(forms, tokens, rules) -> list[Finding]:
    out = []
    for f in iter_forms(forms):
        declared: list[tuple[str, Span]] = []
        if f.kind == PROCEDURE_DEF and f.params:
            header = f.header_span
            for t in tokens[f.tokens[0]:f.tokens[1]]:
                if t.start >= header.end:
                    break
                if t.kind == IDENTIFIER and t.text in f.params and t.text in BUILTINS:
                    declared.append((t.text, t.span))
        elif f.kind == CONSTRUCT and f.head in ("let", "prog"):
            got = _binding_names(f, tokens)
            if got:
                declared += [(t.text, t.span) for t in got[0] if t.text in BUILTINS]
        for name, span in declared:
            out.append(Finding("STY004", span, rules.shadow_builtin, f"'{name}' shadows a built-in"))
    return out


def _unused_locals(forms, tokens, rules) -> list[Finding]:
    out = []
    for f in iter_forms(forms):
        if f.kind != CONSTRUCT or f.head not in ("let", "prog"):
            continue
        got = _binding_names(f, tokens)
        if not got:
            continue
        names, list_end = got
        used = Counter(
            t.text for t in tokens[list_end + 1:f.tokens[1]] if t.kind == IDENTIFIER
        )
        for t in names:
            if used[t.text] == 0:
                out.append(Finding("STY005", t.span, rules.unused_local, f"unused local '{t.text}'"))
    return out


# -- efficiency class -------------------------------------------------------


def _append_in_loop(forms, tokens, rules) -> list[Finding]:
    hits: dict[int, Token] = {}
    for f in iter_forms(forms):
        if f.kind != CONSTRUCT or f.head not in LOOP_CONSTRUCTS:
            continue
        lo, hi = f.tokens
        for t in tokens[lo:hi]:
            if t.kind == IDENTIFIER and t.text == "append":
                hits[t.start] = t
    return [
        Finding("EFF001", t.span, rules.append_in_loop, "append inside a loop")
        for _, t in sorted(hits.items())
    ]


def _call_extents(tokens: Sequence[Token], lo: int, hi: int) -> list[tuple[int, int]]:
    """Token ranges of every call ``name(...)`` inside [lo, hi)."""
    opens: list[int] = []
    spans = []
    for i in range(lo, hi):
        t = tokens[i]
        if t.kind == OPEN:
            opens.append(i)
        elif t.kind == CLOSE and opens:
            j = opens.pop()
            if j > lo and tokens[j - 1].kind == IDENTIFIER and tokens[j - 1].end == tokens[j].start:
                if i - j > 1:  # at least one argument
                    spans.append((j - 1, i + 1))
    return spans


def _repeated_subexpr(forms, tokens, rules) -> list[Finding]:
    out = []
    for top in forms:
        if top.kind == "comment-block":
            continue
        lo, hi = top.tokens
        groups: dict[tuple[str, ...], list[tuple[int, int]]] = defaultdict(list)
        for a, b in _call_extents(tokens, lo, hi):
            key = tuple(t.text for t in tokens[a:b] if not t.is_comment)
            groups[key].append((a, b))
        repeated = {k: v for k, v in groups.items() if len(v) >= rules.repeat_threshold}
        for key, occ in sorted(repeated.items(), key=lambda kv: kv[1][0]):
            # skip sub-expressions whose every occurrence sits inside another repeated one
            outer = [
                o for k2, v2 in repeated.items() if k2 != key and len(k2) > len(key) for o in v2
            ]
            if outer and all(any(oa <= a and b <= ob for oa, ob in outer) for a, b in occ):
                continue
            a, b = occ[0]
            out.append(
                Finding(
                    "EFF002",
                    Span(tokens[a].start, tokens[b - 1].end),
                    rules.repeated_subexpr,
                    f"sub-expression repeated {len(occ)} times",
                )
            )
    return out


# -- delta metric -----------------------------------------------------------


def substitute(text: str, span: Span, replacement: str) -> str:
    if span.end > len(text):
        raise ValueError(f"span {span} out of bounds for text of length {len(text)}")
    return text[: span.start] + replacement + text[span.end:]


def delta_liq(
    pair: Pair, prediction: str, file: SourceFile, rules: RuleTable = DEFAULT_RULES
) -> int:
    """IQ of the file with the pair's output replaced by ``prediction``, minus the original IQ."""
    if pair.file_id != file.id:
        raise ValueError(f"pair {pair.id} does not belong to file {file.id}")
    base = file.lint.iq if file.lint is not None and rules is DEFAULT_RULES else lint_file(file.text, rules).iq
    return lint_file(substitute(file.text, pair.output_span, prediction), rules).iq - base


__all__ = [
    "RuleTable",
    "DEFAULT_RULES",
    "RULE_TABLE_VERSION",
    "SYNTAX_RULES",
    "lint_file",
    "lint_source",
    "delta_liq",
    "substitute",
]

