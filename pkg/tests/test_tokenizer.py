import random

import pytest

from skillcorpus.tokenizer import NUM_BASE_SYMBOLS, SubwordVocab, sentinel_id, train_tokenizer

from conftest import MINI


@pytest.fixture(scope="module")
def corpus_texts():
    return [p.read_text(errors="replace") for p in sorted(MINI.rglob("*.il*"))]


@pytest.fixture(scope="module")
def vocab(corpus_texts):
    return train_tokenizer(corpus_texts, 4000)


def test_first_merge_is_most_frequent_pair():
    v = train_tokenizer(["aaaa"], NUM_BASE_SYMBOLS + 5)
    assert v.merges[0] == (b"a", b"a")


def test_training_is_deterministic(corpus_texts):
    assert train_tokenizer(corpus_texts, 1000).merges == train_tokenizer(corpus_texts, 1000).merges


def test_vocab_size_below_base_symbols_rejected():
    with pytest.raises(ValueError):
        train_tokenizer(["x"], NUM_BASE_SYMBOLS - 1)
    with pytest.raises(ValueError):
        train_tokenizer([], 1000)


def test_procedure_is_one_token(vocab):
    assert vocab.tokens("procedure") == ["procedure"]


def test_size_cap_respected(corpus_texts):
    assert len(train_tokenizer(corpus_texts, 400)) <= 400


def test_roundtrip_on_corpus_and_random_snippets(vocab, corpus_texts):
    for t in corpus_texts:
        assert vocab.decode(vocab.encode(t)) == t
    rng = random.Random(0)
    for _ in range(100):
        t = rng.choice(corpus_texts)
        a = rng.randrange(len(t))
        s = t[a:a + rng.randrange(1, 200)]
        assert vocab.decode(vocab.encode(s)) == s


def test_empty_and_whitespace(vocab):
    assert vocab.encode("") == [] and vocab.decode([]) == ""
    ws = "a\t\tb\n\n  c \t\n"
    assert vocab.decode(vocab.encode(ws)) == ws


def test_unknown_id_rejected(vocab):
    with pytest.raises(ValueError):
        vocab.decode([len(vocab) + 10])


def test_save_load(vocab, tmp_path):
    digest = vocab.save(tmp_path / "v.txt")
    back = SubwordVocab.load(tmp_path / "v.txt")
    assert back.merges == vocab.merges and back.digest() == digest
    text = (tmp_path / "v.txt").read_text()
    assert text.startswith("#skillcorpus-bpe 1\n") and "#specials" in text


def test_sentinels():
    assert sentinel_id(0) == 3 and sentinel_id(99) == 102
    with pytest.raises(ValueError):
        sentinel_id(100)
