"""Shared domain types and the line-delimited JSON manifest."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Iterator


def content_hash(text: str) -> str:
    """Hex SHA-256 of the UTF-8 encoding of ``text``."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def bytes_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Origin(str, enum.Enum):
    PRIMARY = "primary-proprietary"
    SECONDARY = "secondary-proprietary"
    REPO_SEARCH = "repo-search"
    CODE_SEARCH = "code-search"


class PairKind(str, enum.Enum):
    CF = "CF"
    CC = "CC"
    FC = "FC"


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class FileFilter(str, enum.Enum):
    NONE = "none"
    LINT_PASS = "lint-pass"
    LINT_IQ_GE_10 = "lint-iq-ge-10"
    HAS_PAIRS = "has-pairs"


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def contains(self, other: Span) -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlaps(self, other: Span) -> bool:
        return self.start < other.end and other.start < self.end

    def slice(self, text: str) -> str:
        if self.end > len(text):
            raise ValueError(f"span {self} exceeds text of length {len(text)}")
        return text[self.start:self.end]


@dataclass(frozen=True)
class Finding:
    rule_id: str
    span: Span
    deduction: int
    message: str


@dataclass(frozen=True)
class LintReport:
    grade: str  # "pass" | "fail"
    iq: int
    findings: tuple[Finding, ...] = ()

    @property
    def passed(self) -> bool:
        return self.grade == "pass"

    def to_dict(self) -> dict:
        return {
            "grade": self.grade,
            "iq": self.iq,
            "findings": [
                {
                    "rule_id": f.rule_id,
                    "span": [f.span.start, f.span.end],
                    "deduction": f.deduction,
                    "message": f.message,
                }
                for f in self.findings
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> LintReport:
        return cls(
            grade=d["grade"],
            iq=d["iq"],
            findings=tuple(
                Finding(f["rule_id"], Span(*f["span"]), f["deduction"], f["message"])
                for f in d["findings"]
            ),
        )


@dataclass(frozen=True)
class SourceFile:
    id: str
    origin: Origin
    path: str
    text: str
    lint: LintReport | None = None

    @classmethod
    def from_text(cls, text: str, origin: Origin | str, path: str) -> SourceFile:
        return cls(id=content_hash(text), origin=Origin(origin), path=path, text=text)

    def with_text(self, text: str) -> SourceFile:
        """Return a copy carrying new text; id and cached lint follow the text."""
        if text == self.text:
            return self
        return SourceFile(id=content_hash(text), origin=self.origin, path=self.path, text=text)

    def with_lint(self, report: LintReport) -> SourceFile:
        return SourceFile(self.id, self.origin, self.path, self.text, report)

    def to_dict(self) -> dict:
        d = {"id": self.id, "origin": self.origin.value, "path": self.path, "text": self.text}
        if self.lint is not None:
            d["lint"] = self.lint.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SourceFile:
        lint = LintReport.from_dict(d["lint"]) if d.get("lint") else None
        return cls(d["id"], Origin(d["origin"]), d["path"], d["text"], lint)


def pair_id(file_id: str, kind: PairKind, input_span: Span, output_span: Span) -> str:
    key = f"{file_id}:{kind.value}:{input_span.start}:{input_span.end}:{output_span.start}:{output_span.end}"
    return content_hash(key)


@dataclass(frozen=True)
class Pair:
    id: str
    file_id: str
    kind: PairKind
    input_span: Span
    output_span: Span
    input_text: str
    output_text: str
    top_level: bool = True
    # FC pair whose input carries the first half of a long body
    split_body: bool = False

    def __post_init__(self) -> None:
        if self.input_span.end > self.output_span.start:
            raise ValueError("input span must precede output span without overlap")

    @classmethod
    def build(
        cls,
        file: SourceFile,
        kind: PairKind,
        input_span: Span,
        output_span: Span,
        split_body: bool = False,
    ) -> Pair:
        return cls(
            id=pair_id(file.id, kind, input_span, output_span),
            file_id=file.id,
            kind=kind,
            input_span=input_span,
            output_span=output_span,
            input_text=input_span.slice(file.text),
            output_text=output_span.slice(file.text),
            split_body=split_body,
        )


@dataclass(frozen=True)
class TrainingStrategy:
    self_supervised: bool = True
    file_filter: FileFilter = FileFilter.NONE
    keep_comments: bool = True
    supervised: bool = True
    deduplicated: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "file_filter", FileFilter(self.file_filter))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["file_filter"] = self.file_filter.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TrainingStrategy:
        return cls(**d)


def all_strategies() -> list[TrainingStrategy]:
    """Every distinguishable strategy: 24 self-supervised ones plus 2 supervised-only runs."""
    out = []
    self_sup_variants = [(False, FileFilter.NONE, True)] + [
        (True, ff, kc) for ff in FileFilter for kc in (True, False)
    ]
    for self_sup, ff, kc in self_sup_variants:
        for sup, dedup in ((False, False), (True, False), (True, True)):
            if not self_sup and not sup:
                continue
            out.append(TrainingStrategy(self_sup, ff, kc, sup, dedup))
    return out


# -- manifest ---------------------------------------------------------------


@dataclass
class FileEntry:
    origin: Origin
    path: str
    split: Split | None = None


@dataclass
class PairEntry:
    file_id: str
    kind: PairKind
    input_span: Span
    output_span: Span
    top_level: bool = True
    split_body: bool = False
    split: Split | None = None

    @classmethod
    def of(cls, pair: Pair, split: Split | None = None) -> PairEntry:
        return cls(
            pair.file_id, pair.kind, pair.input_span, pair.output_span,
            pair.top_level, pair.split_body, split,
        )

    def to_pair(self, pid: str, text: str) -> Pair:
        return Pair(
            id=pid,
            file_id=self.file_id,
            kind=self.kind,
            input_span=self.input_span,
            output_span=self.output_span,
            input_text=self.input_span.slice(text),
            output_text=self.output_span.slice(text),
            top_level=self.top_level,
            split_body=self.split_body,
        )


class ManifestError(ValueError):
    pass


RECORD_TYPES = ("file", "pair", "split", "export")


@dataclass
class DatasetManifest:
    seed: int = 0
    strategy: TrainingStrategy = field(default_factory=TrainingStrategy)
    files: dict[str, FileEntry] = field(default_factory=dict)
    pairs: dict[str, PairEntry] = field(default_factory=dict)
    exports: dict[str, str] = field(default_factory=dict)

    def file_ids(self, split: Split) -> list[str]:
        return [fid for fid, e in self.files.items() if e.split == split]

    def pair_ids(self, split: Split) -> list[str]:
        return [pid for pid, e in self.pairs.items() if e.split == split]

    def pair_counts(self, split: Split) -> dict[str, int]:
        counts = {k.value: 0 for k in PairKind}
        for e in self.pairs.values():
            if e.split == split:
                counts[e.kind.value] += 1
        return counts

    def records(self) -> Iterator[dict]:
        yield {
            "record_type": "split",
            "seed": self.seed,
            "strategy": self.strategy.to_dict(),
            "counts": {
                s.value: {"files": len(self.file_ids(s)), "pairs": self.pair_counts(s)}
                for s in Split
            },
        }
        for fid, e in self.files.items():
            yield {
                "record_type": "file",
                "id": fid,
                "origin": e.origin.value,
                "path": e.path,
                "split": e.split.value if e.split else None,
            }
        for pid, e in self.pairs.items():
            yield {
                "record_type": "pair",
                "id": pid,
                "file_id": e.file_id,
                "kind": e.kind.value,
                "input_span": [e.input_span.start, e.input_span.end],
                "output_span": [e.output_span.start, e.output_span.end],
                "top_level": e.top_level,
                "split_body": e.split_body,
                "split": e.split.value if e.split else None,
            }
        for name, digest in self.exports.items():
            yield {"record_type": "export", "name": name, "digest": digest}

    def dumps(self) -> str:
        return "".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records()
        )

    def digest(self) -> str:
        return content_hash(self.dumps())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, data: str) -> DatasetManifest:
        return cls.from_records(json.loads(line) for line in data.splitlines() if line.strip())

    @classmethod
    def load(cls, path: str | Path) -> DatasetManifest:
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> DatasetManifest:
        m = cls()

        def _split(v):
            return Split(v) if v else None

        for r in records:
            rt = r.get("record_type")
            if rt not in RECORD_TYPES:
                raise ManifestError(f"unknown record_type {rt!r}")
            try:
                if rt == "split":
                    m.seed = int(r["seed"])
                    m.strategy = TrainingStrategy.from_dict(r["strategy"])
                elif rt == "file":
                    m.files[r["id"]] = FileEntry(Origin(r["origin"]), r["path"], _split(r["split"]))
                elif rt == "pair":
                    m.pairs[r["id"]] = PairEntry(
                        r["file_id"],
                        PairKind(r["kind"]),
                        Span(*r["input_span"]),
                        Span(*r["output_span"]),
                        bool(r["top_level"]),
                        bool(r.get("split_body", False)),
                        _split(r["split"]),
                    )
                else:
                    m.exports[r["name"]] = r["digest"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"malformed {rt} record: {exc}") from exc
        return m


# -- corpus files -----------------------------------------------------------


def write_corpus(files: Iterable[SourceFile], path: str | Path) -> str:
    data = "".join(
        json.dumps(f.to_dict(), sort_keys=True, separators=(",", ":")) + "\n" for f in files
    )
    Path(path).write_text(data, encoding="utf-8")
    return content_hash(data)


def read_corpus(path: str | Path) -> list[SourceFile]:
    with open(path, encoding="utf-8") as fh:
        return [SourceFile.from_dict(json.loads(line)) for line in fh if line.strip()]
