"""Byte-level pair-merge subword tokenizer trained on SKILL text.

Id layout: ``0`` pad, ``1`` end-of-sequence, ``2`` unknown, then 100
sentinels, then the 256 single bytes, then each distinct merged symbol in
the order its first merge was learned.
Every byte has an id, so any text encodes without unknowns.
"""

from __future__ import annotations

import heapq
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import kernels
from .model import content_hash

PAD_ID, EOS_ID, UNK_ID = 0, 1, 2
NUM_SENTINELS = 100
SENTINEL_BASE = 3
BYTE_BASE = SENTINEL_BASE + NUM_SENTINELS
MERGE_BASE = BYTE_BASE + 256
NUM_BASE_SYMBOLS = MERGE_BASE

SPECIAL_NAMES = {PAD_ID: "<pad>", EOS_ID: "</s>", UNK_ID: "<unk>"}

DEFAULT_VOCAB_SIZE = 8000

# identifiers, digit runs, whitespace runs, punctuation runs
_PRETOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[0-9]+|\s+|[^\sA-Za-z0-9_]+")

_HEADER = "#skillcorpus-bpe 1"


def sentinel_id(i: int) -> int:
    if not 0 <= i < NUM_SENTINELS:
        raise ValueError(f"sentinel index {i} out of range")
    return SENTINEL_BASE + i


def is_sentinel(token_id: int) -> bool:
    return SENTINEL_BASE <= token_id < SENTINEL_BASE + NUM_SENTINELS


def pretokenize(text: str) -> list[str]:
    return _PRETOKEN.findall(text)


@dataclass
class SubwordVocab:
    merges: list[tuple[bytes, bytes]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._pieces: list[bytes] = [bytes([b]) for b in range(256)]
        self._piece_id: dict[bytes, int] = {p: BYTE_BASE + i for i, p in enumerate(self._pieces)}
        self._ranks: dict[tuple[int, int], tuple[int, int]] = {}
        for rank, (a, b) in enumerate(self.merges):
            merged = a + b
            new_id = self._piece_id.get(merged)
            if new_id is None:
                new_id = BYTE_BASE + len(self._pieces)
                self._pieces.append(merged)
                self._piece_id[merged] = new_id
            self._ranks[(self._piece_id[a], self._piece_id[b])] = (rank, new_id)
        self._cache: dict[str, list[int]] = {}

    def __len__(self) -> int:
        return BYTE_BASE + len(self._pieces)

    @property
    def vocab(self) -> dict[str, int]:
        """Display string -> id, bytes shown as latin-1."""
        out = {name: i for i, name in SPECIAL_NAMES.items()}
        out.update({f"<extra_id_{i}>": sentinel_id(i) for i in range(NUM_SENTINELS)})
        for i, piece in enumerate(self._pieces):
            out.setdefault(piece.decode("latin-1"), BYTE_BASE + i)
        return out

    def piece(self, token_id: int) -> bytes:
        if token_id in SPECIAL_NAMES:
            return SPECIAL_NAMES[token_id].encode()
        if is_sentinel(token_id):
            return f"<extra_id_{token_id - SENTINEL_BASE}>".encode()
        k = token_id - BYTE_BASE
        if 0 <= k < len(self._pieces):
            return self._pieces[k]
        raise ValueError(f"unknown token id {token_id}")

    def token_id(self, piece: bytes) -> int:
        return self._piece_id[piece]

    def encode_chunk(self, chunk: str) -> list[int]:
        ids = self._cache.get(chunk)
        if ids is None:
            ids = kernels.bpe_word([BYTE_BASE + b for b in chunk.encode("utf-8")], self._ranks)
            self._cache[chunk] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        out: list[int] = []
        for chunk in pretokenize(text):
            out.extend(self.encode_chunk(chunk))
        return out

    def decode(self, ids: Iterable[int]) -> str:
        return b"".join(self.piece(int(i)) for i in ids).decode("utf-8", errors="replace")

    def tokens(self, text: str) -> list[str]:
        """Surface strings of the subword tokens of ``text``."""
        return [self.piece(i).decode("latin-1") for i in self.encode(text)]

    # -- persistence --

    def dumps(self) -> str:
        lines = [_HEADER, f"#merges {len(self.merges)}"]
        lines += [f"{a.hex()} {b.hex()}" for a, b in self.merges]
        lines += [
            "#specials",
            f"pad {PAD_ID} {SPECIAL_NAMES[PAD_ID]}",
            f"eos {EOS_ID} {SPECIAL_NAMES[EOS_ID]}",
            f"unk {UNK_ID} {SPECIAL_NAMES[UNK_ID]}",
            f"sentinels {SENTINEL_BASE} {NUM_SENTINELS}",
            f"bytes {BYTE_BASE} 256",
        ]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> str:
        data = self.dumps()
        Path(path).write_text(data, encoding="ascii")
        return content_hash(data)

    def digest(self) -> str:
        return content_hash(self.dumps())

    @classmethod
    def loads(cls, data: str) -> SubwordVocab:
        lines = data.splitlines()
        if not lines or lines[0] != _HEADER:
            raise ValueError("not a skillcorpus vocabulary file")
        n = int(lines[1].split()[1])
        merges = []
        for line in lines[2:2 + n]:
            a, b = line.split()
            merges.append((bytes.fromhex(a), bytes.fromhex(b)))
        if lines[2 + n] != "#specials":
            raise ValueError("missing specials block")
        return cls(merges)

    @classmethod
    def load(cls, path: str | Path) -> SubwordVocab:
        return cls.loads(Path(path).read_text(encoding="ascii"))


def train_tokenizer(texts: Sequence[str], vocab_size: int = DEFAULT_VOCAB_SIZE) -> SubwordVocab:
    """Greedy pair-merge training.

    Merges the most frequent adjacent symbol pair (ties broken by the
    pair's bytes) until ``vocab_size`` ids exist or no pair occurs twice.
    """
    if vocab_size < NUM_BASE_SYMBOLS:
        raise ValueError(f"vocab_size {vocab_size} is below the {NUM_BASE_SYMBOLS} base symbols")
    if not texts:
        raise ValueError("cannot train a tokenizer on an empty corpus")

    chunk_freq = Counter()
    for t in texts:
        chunk_freq.update(pretokenize(t))
    chunks = sorted(chunk_freq)
    words = [[b for b in c.encode("utf-8")] for c in chunks]
    freqs = [chunk_freq[c] for c in chunks]
    pieces: list[bytes] = [bytes([b]) for b in range(256)]
    piece_id: dict[bytes, int] = {p: i for i, p in enumerate(pieces)}

    counts = kernels.count_pairs(words, freqs)
    where: dict[tuple[int, int], set[int]] = defaultdict(set)
    for w, word in enumerate(words):
        for i in range(len(word) - 1):
            where[(word[i], word[i + 1])].add(w)

    def entry(pair):
        return (-counts[pair], pieces[pair[0]], pieces[pair[1]], pair)

    heap = [entry(p) for p in counts]
    heapq.heapify(heap)
    merges: list[tuple[bytes, bytes]] = []
    budget = vocab_size - NUM_BASE_SYMBOLS

    while len(pieces) - 256 < budget and heap:
        neg, _, _, pair = heapq.heappop(heap)
        current = counts.get(pair, 0)
        if current != -neg:
            continue  # stale entry
        if current < 2:
            break
        a, b = pair
        merged_piece = pieces[a] + pieces[b]
        new = piece_id.get(merged_piece)
        if new is None:
            new = len(pieces)
            pieces.append(merged_piece)
            piece_id[merged_piece] = new
        merges.append((pieces[a], pieces[b]))
        changed: set[tuple[int, int]] = set()
        for w in sorted(where.pop(pair, ())):
            old = words[w]
            f = freqs[w]
            for i in range(len(old) - 1):
                p = (old[i], old[i + 1])
                counts[p] -= f
                changed.add(p)
                where[p].discard(w)
            merged = kernels.merge_word(old, a, b, new)
            words[w] = merged
            for i in range(len(merged) - 1):
                p = (merged[i], merged[i + 1])
                counts[p] = counts.get(p, 0) + f
                changed.add(p)
                where[p].add(w)
        counts.pop(pair, None)
        changed.discard(pair)
        for p in changed:
            if counts.get(p, 0) > 0:
                heapq.heappush(heap, entry(p))
            else:
                counts.pop(p, None)
                where.pop(p, None)

    return SubwordVocab(merges)
