from hypothesis import given, settings
from hypothesis import strategies as st

from skillcorpus.model import Origin, SourceFile
from skillcorpus.preprocess import clean_text, dedup_files, normalize_comments, strip_comments
from skillcorpus.syntax import lex

from conftest import FIXTURES

PIECES = list("ab1 \n\t();/*\"=@.:é") + ["Author", "printf(", "Version:", "; ", "/* ", " */"]
TEXT = st.lists(st.sampled_from(PIECES), max_size=60).map("".join)


def test_metadata_comment_removed():
    assert clean_text("; Author: a@b.com\nx = 1") == "x = 1"


def test_commented_out_code_removed():
    assert clean_text('; printf("debug")\ny = 2') == "y = 2"


def test_decoration_only_comment_removed():
    assert clean_text(";;;;;;;;;;\nz = 3") == "z = 3"


def test_non_ascii_dropped():
    assert clean_text("; café\nx = 1") == "; caf\nx = 1"


def test_normalize_line_comment():
    assert normalize_comments("; make a rect") == "/* make a rect */"
    assert normalize_comments("x = 1") == "x = 1"
    assert normalize_comments('"; not a comment"') == '"; not a comment"'


def test_strip_comments():
    assert strip_comments("x=1 /* set x */") == "x=1"
    assert strip_comments("/* only */\n; comment") == ""


def test_strip_fixture_body_keeps_statements():
    body = normalize_comments((FIXTURES / "pcell_cf.il").read_text())
    out = strip_comments(body)
    assert "/*" not in out
    assert "cv = pcCellView\n" in out and "    t\n" in out


def test_dedup_files_exact_hash_only():
    a = SourceFile.from_text("x = 1", Origin.PRIMARY, "a.il")
    b = SourceFile.from_text("x = 1", Origin.CODE_SEARCH, "b.il")
    c = SourceFile.from_text("x = 2", Origin.PRIMARY, "c.il")
    assert [f.path for f in dedup_files([a, b, c])] == ["a.il", "c.il"]


@given(TEXT)
@settings(max_examples=300)
def test_clean_is_idempotent_and_ascii(text):
    once = clean_text(text)
    assert clean_text(once) == once
    assert all(ord(ch) < 128 for ch in once)


@given(TEXT)
@settings(max_examples=300)
def test_normalize_and_strip_are_idempotent(text):
    t = clean_text(text)
    n = normalize_comments(t)
    assert normalize_comments(n) == n
    s = strip_comments(n)
    assert strip_comments(s) == s


@given(TEXT)
@settings(max_examples=300)
def test_normalize_preserves_code_tokens(text):
    t = clean_text(text)
    code = [(k.kind, k.text) for k in lex(t) if not k.is_comment]
    assert [(k.kind, k.text) for k in lex(normalize_comments(t)) if not k.is_comment] == code
