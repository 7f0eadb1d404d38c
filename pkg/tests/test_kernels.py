import importlib
import random

import pytest

from skillcorpus import _pykernels, kernels

compiled = pytest.importorskip("skillcorpus._ckernels")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_env_var_forces_fallback(monkeypatch):
    monkeypatch.setenv("SKILLCORPUS_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("SKILLCORPUS_PURE_PYTHON")
        importlib.reload(kernels)


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    rng = random.Random(seed)
    words = [[rng.randrange(5) for _ in range(rng.randint(0, 12))] for _ in range(40)]
    freqs = [rng.randint(1, 9) for _ in words]
    assert compiled.count_pairs(words, freqs) == _pykernels.count_pairs(words, freqs)
    for w in words:
        assert compiled.merge_word(w, 1, 2, 99) == _pykernels.merge_word(w, 1, 2, 99)
    ranks = {(a, b): (rng.randrange(50), 100 + a * 5 + b) for a in range(5) for b in range(5) if rng.random() < 0.4}
    for w in words:
        assert compiled.bpe_word(w, ranks) == _pykernels.bpe_word(w, ranks)
    for n in (1, 2, 3, 4):
        a, b = words[0], words[1]
        assert compiled.ngram_counts(a, n) == _pykernels.ngram_counts(a, n)
        assert compiled.clipped_matches(a, b, n) == _pykernels.clipped_matches(a, b, n)
