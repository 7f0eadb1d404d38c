"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Kernel inputs come from the bundled mini corpus.  Each kernel runs on both
backends, outputs are checked for equality, and the best of ``--repeat``
timings is reported.  A final end-to-end case trains a tokenizer in a
subprocess per backend.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import timeit
from importlib import resources
from pathlib import Path

from skillcorpus import _pykernels
from skillcorpus.tokenizer import BYTE_BASE, train_tokenizer

try:
    from skillcorpus import _ckernels
except ImportError:
    _ckernels = None

MINI = Path(str(resources.files("skillcorpus") / "data" / "mini_corpus"))

E2E = """
import time
from pathlib import Path
from skillcorpus import kernels
from skillcorpus.tokenizer import train_tokenizer
texts = [p.read_text(errors="replace") for p in sorted(Path({root!r}).rglob("*.il*"))] * 8
t0 = time.perf_counter()
train_tokenizer(texts, 3000)
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def corpus_texts() -> list[str]:
    return [p.read_text(errors="replace") for p in sorted(MINI.rglob("*.il*"))]


def workloads():
    texts = corpus_texts()
    vocab = train_tokenizer(texts, 2000)
    ranks = vocab._ranks
    words = [[BYTE_BASE + b for b in w.encode()] for t in texts for w in t.split()]
    freqs = [1 + i % 5 for i in range(len(words))]
    long_words = [w for w in words if len(w) > 4]
    a, b = max(_pykernels.count_pairs(words, freqs).items(), key=lambda kv: kv[1])[0]

    rng = random.Random(0)
    seqs = [[rng.randrange(50) for _ in range(rng.randint(20, 400))] for _ in range(200)]
    refs = [[rng.randrange(50) for _ in range(rng.randint(20, 400))] for _ in range(200)]

    return {
        "count_pairs": lambda k: k.count_pairs(words, freqs),
        "merge_word": lambda k: [k.merge_word(w, a, b, 9999) for w in words],
        "bpe_word": lambda k: [k.bpe_word(w, ranks) for w in long_words],
        "ngram_counts": lambda k: [k.ngram_counts(s, 3) for s in seqs],
        "clipped_matches": lambda k: [k.clipped_matches(s, r, n) for s, r in zip(seqs, refs) for n in (1, 2, 3, 4)],
    }


def time_best(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10_000:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def end_to_end() -> dict[str, float]:
    out = {}
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("SKILLCORPUS_PURE_PYTHON", None)
        if pure:
            env["SKILLCORPUS_PURE_PYTHON"] = "1"
        res = subprocess.run(
            [sys.executable, "-c", E2E.format(root=str(MINI))], env=env, capture_output=True, text=True, check=True
        )
        backend, secs = res.stdout.split()
        out[backend] = float(secs)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", type=Path, help="also write results here")
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; run `pip install --no-build-isolation -e .` first")
        return 1

    results = {}
    print(f"{'kernel':<16} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, run in workloads().items():
        assert run(_pykernels) == run(_ckernels), f"{name}: backends disagree"
        py = time_best(lambda: run(_pykernels), args.repeat)
        cy = time_best(lambda: run(_ckernels), args.repeat)
        results[name] = {"python": py, "cython": cy, "speedup": py / cy}
        print(f"{name:<16} {py * 1e3:>10.3f} {cy * 1e3:>10.3f} {py / cy:>7.2f}x")

    e2e = end_to_end()
    results["train_tokenizer"] = {**e2e, "speedup": e2e["python"] / e2e["cython"]}
    print(f"{'train_tokenizer':<16} {e2e['python'] * 1e3:>10.1f} {e2e['cython'] * 1e3:>10.1f} "
          f"{e2e['python'] / e2e['cython']:>7.2f}x")

    if args.json:
        args.json.write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
