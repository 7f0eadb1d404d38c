from hypothesis import given, settings
from hypothesis import strategies as st

from skillcorpus.syntax import (
    BLOCK_COMMENT,
    COMMENT_BLOCK,
    CONSTRUCT,
    ERROR,
    LINE_COMMENT,
    PROCEDURE_DEF,
    STATEMENT,
    STRING,
    extract_comment_blocks,
    extract_procedures,
    lex,
    parse_text,
    reassemble,
    whitespace_gaps,
)

from conftest import FIXTURES

SKILL_CHARS = st.sampled_from(list("abcxyz019 _\n\t()[]{};/*\"'?=-+~>.,:@\\"))


def roundtrip(text):
    toks = lex(text)
    return reassemble(toks, whitespace_gaps(text, toks))


@given(st.text(SKILL_CHARS, max_size=200))
@settings(max_examples=300)
def test_lex_is_lossless(text):
    assert roundtrip(text) == text


def test_token_kinds():
    kinds = [t.kind for t in lex('x = "a;b" ; tail\n/* c */ f(?k 1.5 \'sym)')]
    assert kinds[:3] == ["identifier", "operator", STRING]
    assert LINE_COMMENT in kinds and BLOCK_COMMENT in kinds
    assert "keyword-arg" in kinds and "number" in kinds and "quote-mark" in kinds


def test_semicolon_inside_string_is_not_a_comment():
    assert [t.kind for t in lex('"; not a comment"')] == [STRING]


def test_unterminated_block_comment_runs_to_end():
    toks = lex("x = 1 /* open\nmore")
    assert toks[-1].kind == ERROR and toks[-1].text == "/* open\nmore"


def test_unterminated_string_stops_at_line_end():
    toks = lex('s = "abc\ny = 2')
    assert toks[2].kind == ERROR and toks[2].text == '"abc'
    assert [t.text for t in toks[3:]] == ["y", "=", "2"]


def test_pcell_fixture_parses_to_comment_and_definition():
    p = parse_text((FIXTURES / "pcell_cf.il").read_text())
    assert [f.kind for f in p.forms] == [COMMENT_BLOCK, PROCEDURE_DEF]
    assert p.forms[1].name == "rectCell"


def test_foreach_is_a_construct_with_one_child():
    (form,) = parse_text("foreach(x lst println(x))").forms
    assert form.kind == CONSTRUCT and form.head == "foreach"
    assert [c.kind for c in form.children] == [STATEMENT]


def test_lisp_style_definition():
    (form,) = parse_text("(defun add (a b) (plus a b))").forms
    assert form.kind == PROCEDURE_DEF and form.name == "add" and form.params == ("a", "b")


def test_call_style_procedure_params_and_body():
    text = "procedure(f(a b)\n  x = a\n  b\n)"
    (form,) = parse_text(text).forms
    assert form.name == "f" and form.params == ("a", "b")
    assert form.body_span.slice(text) == "x = a\n  b"


def test_unbalanced_input_records_errors():
    p = parse_text("f(a (b)")
    assert any(f.errors for f in p.forms)


def test_extract_procedures_links_preceding_comment():
    text = (FIXTURES / "pcell_cf.il").read_text()
    (info,) = extract_procedures(parse_text(text).forms, text)
    assert info.preceding_comment.slice(text).startswith("/* rectCell")
    assert info.header_span.slice(text).endswith('(layer "metal1"))')


def test_comment_separated_by_two_blank_lines_is_not_adjacent():
    text = "; note\n\n\nprocedure(f() 1)"
    (info,) = extract_procedures(parse_text(text).forms, text)
    assert info.preceding_comment is None


def test_comment_above_construct_pairs_with_whole_construct():
    text = "; walk\nforeach(x lst\n  a = x\n  b = x\n)"
    (info,) = extract_comment_blocks(parse_text(text).forms, text)
    assert info.following_form.span.slice(text) == "foreach(x lst\n  a = x\n  b = x\n)"


def test_trailing_comment_is_not_a_leading_comment():
    text = "x = 1 ; trailing\ny = 2"
    infos = extract_comment_blocks(parse_text(text).forms, text)
    assert all(i.following_form is None for i in infos)
