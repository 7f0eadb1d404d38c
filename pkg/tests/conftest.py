from __future__ import annotations

import random
import shutil
from importlib import resources
from pathlib import Path

import pytest

from skillcorpus.model import Origin, SourceFile
from skillcorpus.pairs import mine_corpus
from skillcorpus.preprocess import prepare

DATA = Path(str(resources.files("skillcorpus") / "data"))
FIXTURES = DATA / "fixtures"
MINI = DATA / "mini_corpus"


def fixture_file(name: str, origin: Origin = Origin.PRIMARY) -> SourceFile:
    """A bundled fixture after cleaning and comment normalization."""
    text = (FIXTURES / name).read_text()
    return prepare(SourceFile.from_text(text, origin, name))


def nested_file(counts: list[int], name: str = "nested.il") -> SourceFile:
    """One commented procedure per entry, each holding ``counts[i]`` commented statements.

    Every comment-code pair sits inside its procedure's body, so only
    the comment-function pairs are top-level.
    """
    chunks = []
    for i, n in enumerate(counts):
        body = []
        for j in range(n):
            body.append(f"    /* step {j} of routine {i} */\n    v{i}_{j} = w{i} + {j}")
        chunks.append(
            f"/* routine {i} */\nprocedure(routine{i}(w{i})\n  let((v{i}_0)\n"
            + "\n".join(body)
            + "\n  )\n)"
        )
    return SourceFile.from_text("\n\n".join(chunks) + "\n", Origin.PRIMARY, name)


def engineered_file(i: int, origin=Origin.PRIMARY) -> SourceFile:
    """Two CF, two FC and two top-level CC pairs."""
    parts = []
    for k in range(2):
        parts.append(f"/* doc {i}.{k} */\nprocedure(cf{i}_{k}(a)\n  a + {k}\n)")
        parts.append(f"procedure(fc{i}_{k}(a)\n  a * {k}\n)")
        parts.append(f"/* step {i}.{k} */\nv{i}_{k} = {k}")
    return SourceFile.from_text("\n\n".join(parts) + "\n", origin, f"f{i}.il")


def engineered_corpus():
    files = [engineered_file(i) for i in range(6)]
    files.append(SourceFile.from_text("x = 1\n", Origin.PRIMARY, "nopairs.il"))
    files += [engineered_file(10 + i, Origin.CODE_SEARCH) for i in range(3)]
    return files, mine_corpus(files)


def random_corpus(rng: random.Random, n_files: int) -> list:
    words = ["alpha", "beta", "gamma", "x", "y"]
    files = []
    for i in range(n_files):
        chunks = []
        for j in range(rng.randint(1, 4)):
            stmts = [f"{rng.choice(words)} = {rng.choice(words)} + {rng.randint(0, 2)}" for _ in range(rng.randint(1, 4))]
            inner = "\n".join(f"    /* {rng.choice(words)} */\n    {s}" if rng.random() < 0.6 else f"    {s}" for s in stmts)
            lead = f"/* {rng.choice(words)} */\n" if rng.random() < 0.5 else ""
            chunks.append(f"{lead}procedure(p{rng.randint(0, 3)}(a)\n  let((v)\n{inner}\n  )\n)")
            if rng.random() < 0.5:
                chunks.append(f"/* {rng.choice(words)} */\n{rng.choice(stmts)}")
        files.append(SourceFile.from_text("\n\n".join(chunks) + "\n", Origin.PRIMARY, f"r{i}.il"))
    return files


@pytest.fixture
def mini_copy(tmp_path) -> Path:
    """Writable copy of the bundled mini corpus and its config."""
    dst = tmp_path / "mini"
    shutil.copytree(MINI, dst)
    return dst


# -- acceptance summary -----------------------------------------------------

ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
