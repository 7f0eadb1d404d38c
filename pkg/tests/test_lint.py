import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skillcorpus.lint import DEFAULT_RULES, RuleTable, delta_liq, lint_file, substitute
from skillcorpus.model import Origin, Pair, PairKind, SourceFile, Span
from skillcorpus.pairs import mine_pairs

from conftest import MINI, fixture_file


def rules(text):
    return [f.rule_id for f in lint_file(text).findings]


def test_clean_statement_passes_at_full_iq():
    r = lint_file("x = 1\n")
    assert r.grade == "pass" and r.iq == 100 and not r.findings


def test_empty_file_fails_with_zero():
    r = lint_file("   \n")
    assert r.grade == "fail" and r.iq == 0 and rules("") == ["SYN000"]


def test_unbalanced_delimiter_fails():
    r = lint_file("procedure(f(x)\n  let((y)\n    y = x\n")
    assert r.grade == "fail" and r.iq == 60 and "SYN001" in rules("procedure(f(x)\n")


def test_unterminated_string_fails():
    assert "SYN002" in rules('x = "abc\n')


def test_style_rules():
    assert rules("x = " + "a" * 130) == ["STY001"]
    assert "STY002" in rules("f(\n\tx\n    y)")
    assert rules("list(1,2)") == ["STY003"]
    assert "STY004" in rules("let((car) car = 1 car)")
    assert "STY005" in rules("let((unused) 1)")


def test_efficiency_rules():
    assert "EFF001" in rules("foreach(x xs out = append(out list(x)))")
    assert rules("a = f(y) + f(y) + f(y)") == ["EFF002"]


def test_iq_sums_deductions():
    text = "list(1,2,3)"  # two missing spaces
    r = lint_file(text)
    assert r.iq == 100 - 2 * DEFAULT_RULES.comma_space


def test_rule_table_is_configurable():
    table = RuleTable(comma_space=10)
    assert lint_file("list(1,2)", table).iq == 90


def test_substitute_bounds():
    assert substitute("abcdef", Span(2, 4), "XY") == "abXYef"
    with pytest.raises(ValueError):
        substitute("abc", Span(2, 9), "x")


def test_delta_liq_matches_hand_computation():
    f = fixture_file("fc_sumlist.il")
    (pair,) = mine_pairs(f)
    assert delta_liq(pair, pair.output_text, f) == 0
    # dropping the closing paren of let() unbalances the file: 100 -> 60
    assert delta_liq(pair, pair.output_text[:-1], f) == -40


def test_delta_liq_rejects_foreign_pair():
    f = fixture_file("fc_sumlist.il")
    g = fixture_file("cc_foreach.il")
    with pytest.raises(ValueError):
        delta_liq(mine_pairs(f)[0], "x", g)


def test_mini_corpus_lints_within_bounds():
    for p in sorted(MINI.rglob("*.il*")):
        r = lint_file(p.read_text(errors="replace"))
        assert 0 <= r.iq <= 100


CODE = st.lists(
    st.sampled_from(["x = 1", "f(a b)", "let((v) v)", "foreach(i l g(i))", "list(1,2)", "\t", "; c", "\n", " "]),
    max_size=25,
).map("\n".join)


@given(CODE, st.integers(min_value=0, max_value=10_000))
@settings(max_examples=300)
def test_injecting_open_delimiter_fails_and_never_raises_iq(code, at):
    base = lint_file(code)
    assert 0 <= base.iq <= 100
    if not base.passed:
        return
    pos = at % (len(code) + 1)
    broken = lint_file(code[:pos] + "\n(" + code[pos:])
    assert broken.grade == "fail"
    assert broken.iq <= base.iq
