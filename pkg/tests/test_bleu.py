import math
import random

import pytest

from skillcorpus.bleu import EMPTY_CANDIDATE, NO_NGRAMS, bleu, bleu_n, bleu_stats, corpus_bleu
from skillcorpus.tokenizer import train_tokenizer

from bleu_oracle import oracle_bleu


def test_identical_scores_one():
    assert bleu(list("abcdef"), list("abcdef")) == 1.0
    assert bleu_n(list("ab"), list("ab"), 1) == 1.0


def test_hand_counted_six_token_case():
    st = bleu_stats(list("abcdef"), list("abcxef"))
    assert st.precisions == (5 / 6, 3 / 5, 1 / 4, 0.0)
    assert st.score == 0.0
    assert bleu_n(list("abcdef"), list("abcxef"), 2) == pytest.approx(0.6, abs=1e-15)


def test_brevity_penalty_case():
    assert bleu(list("abcd"), list("abcde")) == pytest.approx(math.exp(1 - 5 / 4), abs=1e-15)
    assert bleu(list("abcd"), list("abcde"), use_brevity_penalty=False) == 1.0


def test_flags():
    assert EMPTY_CANDIDATE in bleu_stats([], ["a"]).flags
    st = bleu_stats(list("abc"), list("abc"), orders=(4,))
    assert st.score == 0.0 and NO_NGRAMS in st.flags
    with pytest.raises(ValueError):
        bleu([], [])


def test_matches_oracle_on_random_pairs():
    rng = random.Random(1)
    for _ in range(200):
        a = [rng.randrange(6) for _ in range(rng.randint(1, 64))]
        b = [rng.randrange(6) for _ in range(rng.randint(1, 64))]
        assert abs(bleu(a, b) - oracle_bleu(a, b)) <= 1e-12


def test_bounds_and_equality():
    rng = random.Random(2)
    for _ in range(200):
        a = [rng.randrange(4) for _ in range(rng.randint(4, 20))]
        b = list(a) if rng.random() < 0.3 else [rng.randrange(4) for _ in range(rng.randint(4, 20))]
        s = bleu(a, b)
        assert 0.0 <= s <= 1.0
        if a == b:
            assert s == 1.0
        if s == 1.0:
            assert len(a) >= len(b)


def test_corpus_bleu():
    vocab = train_tokenizer(["a b c d e f x"], 400)
    refs = {"p1": "a b c d e f", "p2": "a b c d e"}
    assert corpus_bleu(refs, dict(refs), vocab).mean == 1.0
    assert corpus_bleu(refs, {k: "" for k in refs}, vocab).mean == 0.0
    res = corpus_bleu(refs, {"p1": "a b c d e f"}, vocab)
    assert res.missing == ["p2"] and res.mean == 1.0
    with pytest.raises(ValueError):
        corpus_bleu(refs, {"nope": "x"}, vocab)


def test_corpus_bleu_mixed_hand_cases():
    # one character per token keeps the hand counts readable
    vocab = train_tokenizer(["q"], 359)
    refs = {"same": "abcdef", "six": "abcxef", "short": "abcde"}
    preds = {"same": "abcdef", "six": "abcdef", "short": "abcd"}
    res = corpus_bleu(refs, preds, vocab)
    assert res.scores["six"] == 0.0
    assert res.mean == pytest.approx((1.0 + 0.0 + math.exp(1 - 5 / 4)) / 3, abs=1e-15)
