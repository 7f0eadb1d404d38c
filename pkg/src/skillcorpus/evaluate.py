"""Scoring prediction files, metric/human correlation and the survey pack."""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .bleu import bleu_stats
from .dataset import seq2seq_texts
from .lint import delta_liq
from .model import DatasetManifest, Pair, PairKind, SourceFile, Split
from .tokenizer import SubwordVocab

log = logging.getLogger(__name__)

METRICS = ("bleu", "bleu_1", "bleu_2", "bleu_3", "bleu_4", "delta_liq")
KINDS = (PairKind.CF, PairKind.CC, PairKind.FC)


@dataclass(frozen=True)
class PredictionRecord:
    pair_id: str
    model_name: str
    prediction: str


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    """One JSON object per line with pair_id, model_name and prediction."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                out.append(PredictionRecord(str(d["pair_id"]), str(d["model_name"]), str(d["prediction"])))
            except (json.JSONDecodeError, KeyError) as e:
                raise ValueError(f"{path}:{lineno}: bad prediction record ({e})") from None
    return out


@dataclass
class KindSummary:
    count: int = 0
    bleu: float = 0.0
    delta_liq: float = 0.0


@dataclass
class ModelReport:
    count: int = 0
    bleu: float = 0.0
    delta_liq: float = 0.0
    by_kind: dict[str, KindSummary] = field(default_factory=dict)
    pairs: dict[str, dict] = field(default_factory=dict)
    missing: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    models: dict[str, ModelReport] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"models": {m: asdict(r) for m, r in sorted(self.models.items())}, "errors": list(self.errors)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def table(self) -> str:
        """Plain-text summary, one row per model."""
        head = f"{'model':<24}{'n':>6}{'BLEU':>9}{'dIQ':>9}" + "".join(
            f"{k.value + ' BLEU':>12}{k.value + ' dIQ':>11}" for k in KINDS
        )
        rows = [head, "-" * len(head)]
        for name, r in sorted(self.models.items()):
            row = f"{name:<24}{r.count:>6}{r.bleu:>9.4f}{r.delta_liq:>9.2f}"
            for k in KINDS:
                s = r.by_kind.get(k.value)
                row += f"{s.bleu:>12.4f}{s.delta_liq:>11.2f}" if s else f"{'-':>12}{'-':>11}"
            rows.append(row)
        if self.errors:
            rows.append(f"{len(self.errors)} error(s); see JSON report")
        return "\n".join(rows)


def pairs_in_split(
    manifest: DatasetManifest, corpus: Mapping[str, SourceFile], split: Split = Split.TEST
) -> dict[str, Pair]:
    return {
        pid: manifest.pairs[pid].to_pair(pid, corpus[manifest.pairs[pid].file_id].text)
        for pid in manifest.pair_ids(split)
    }


def score_pair(pair: Pair, prediction: str, vocab: SubwordVocab, file: SourceFile) -> dict:
    _, reference = seq2seq_texts(pair)
    cand, ref = vocab.encode(prediction), vocab.encode(reference)
    out = {"kind": pair.kind.value}
    out["bleu"] = bleu_stats(cand, ref).score
    for n in range(1, 5):
        out[f"bleu_{n}"] = bleu_stats(cand, ref, orders=(n,)).score
    out["delta_liq"] = delta_liq(pair, prediction, file)
    return out


def evaluate_predictions(
    predictions: Iterable[PredictionRecord],
    manifest: DatasetManifest,
    vocab: SubwordVocab,
    corpus: Mapping[str, SourceFile],
) -> EvalReport:
    """BLEU and lint-IQ change for every prediction on a test pair.

    Predictions naming pairs outside the test split go to ``errors``;
    test pairs a model did not predict are listed under its ``missing``.
    """
    pairs = pairs_in_split(manifest, corpus)
    report = EvalReport()
    by_model: dict[str, dict[str, str]] = defaultdict(dict)
    for rec in predictions:
        if rec.pair_id not in pairs:
            where = "not a test pair" if rec.pair_id in manifest.pairs else "unknown pair id"
            report.errors.append(f"{rec.model_name}: {rec.pair_id}: {where}")
            continue
        if rec.pair_id in by_model[rec.model_name]:
            report.errors.append(f"{rec.model_name}: {rec.pair_id}: duplicate prediction, first kept")
            continue
        by_model[rec.model_name][rec.pair_id] = rec.prediction

    for model, preds in sorted(by_model.items()):
        mr = ModelReport()
        for pid in sorted(pairs):
            if pid not in preds:
                mr.missing.append(pid)
                continue
            pair = pairs[pid]
            mr.pairs[pid] = score_pair(pair, preds[pid], vocab, corpus[pair.file_id])
        _aggregate(mr)
        report.models[model] = mr
    return report


def _aggregate(mr: ModelReport) -> None:
    groups: dict[str, list[dict]] = defaultdict(list)
    for s in mr.pairs.values():
        groups[s["kind"]].append(s)
    for kind, scores in sorted(groups.items()):
        mr.by_kind[kind] = KindSummary(
            len(scores),
            math.fsum(s["bleu"] for s in scores) / len(scores),
            math.fsum(s["delta_liq"] for s in scores) / len(scores),
        )
    mr.count = len(mr.pairs)
    if mr.count:
        mr.bleu = math.fsum(s["bleu"] for s in mr.pairs.values()) / mr.count
        mr.delta_liq = math.fsum(s["delta_liq"] for s in mr.pairs.values()) / mr.count


# -- correlation ------------------------------------------------------------


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Product-moment correlation; ``None`` when either side has no variance."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys differ in length")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class HumanScore:
    pair_id: str
    model_name: str
    score: float


def load_human_scores(path: str | Path) -> list[HumanScore]:
    """CSV with header pair_id, model_name, score."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"pair_id", "model_name", "score"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        return [HumanScore(r["pair_id"], r["model_name"], float(r["score"])) for r in reader]


@dataclass
class Correlation:
    coefficients: dict[str, float | None]
    n: int
    excluded_kinds: list[str]
    unmatched: list[str]


def correlate(scores: Sequence[HumanScore], report: EvalReport) -> Correlation:
    """Pearson r between human scores and each automatic metric.

    Pair types whose human scores are all identical are excluded, since
    a constant block carries no ranking information.
    """
    rows = []
    unmatched = []
    for h in scores:
        mr = report.models.get(h.model_name)
        s = mr.pairs.get(h.pair_id) if mr else None
        if s is None:
            unmatched.append(f"{h.model_name}:{h.pair_id}")
        else:
            rows.append((h, s))
    by_kind: dict[str, set[float]] = defaultdict(set)
    for h, s in rows:
        by_kind[s["kind"]].add(h.score)
    excluded = sorted(k for k, v in by_kind.items() if len(v) == 1)
    if excluded:
        log.info("excluding pair types with constant human scores: %s", ", ".join(excluded))
    rows = [(h, s) for h, s in rows if s["kind"] not in excluded]
    coeffs: dict[str, float | None] = {}
    for m in METRICS:
        coeffs[m] = pearson([h.score for h, _ in rows], [s[m] for _, s in rows]) if len(rows) >= 2 else None
    return Correlation(coeffs, len(rows), excluded, unmatched)


# -- survey -----------------------------------------------------------------

CANDIDATES_PER_KIND = 60
SHORTLIST_PER_KIND = 15
PROMPTS_PER_KIND = 5


def survey_questions() -> list[str]:
    data = json.loads(resources.files("skillcorpus.data").joinpath("survey_questions.json").read_text())
    return list(data["questions"])


@dataclass
class SurveyPack:
    stage: int
    candidates: dict[str, list[str]] = field(default_factory=dict)
    prompts: list[dict] = field(default_factory=list)
    key: dict[str, dict[str, str]] = field(default_factory=dict)
    questions: list[str] = field(default_factory=list)

    def bundle(self) -> dict:
        if self.stage == 1:
            return {"stage": 1, "candidates": self.candidates}
        return {"stage": 2, "questions": self.questions, "prompts": self.prompts}

    def write(self, out_dir: str | Path) -> list[Path]:
        """Write the bundle and, for stage 2, the sealed key beside it."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "survey.json"]
        written[0].write_text(json.dumps(self.bundle(), sort_keys=True, indent=2) + "\n")
        if self.stage == 2:
            key = out / "survey_key.json"
            key.write_text(json.dumps(self.key, sort_keys=True, indent=2) + "\n")
            written.append(key)
        return written


def build_survey_pack(
    pairs: Sequence[Pair],
    predictions: Mapping[str, Mapping[str, str]],
    shortlist: Sequence[str] | None = None,
    seed: int = 0,
) -> SurveyPack:
    """Stage 1 (no shortlist): seeded candidates per pair type for manual review.

    Stage 2: sample prompts from the shortlist; each prompt carries every
    model's output under a shuffled letter label.  The label-to-model map
    is returned separately in ``key``.
    """
    rng = random.Random(seed)
    by_kind: dict[PairKind, list[Pair]] = {k: [] for k in KINDS}
    for p in sorted(pairs, key=lambda p: p.id):
        by_kind[p.kind].append(p)

    if shortlist is None:
        pack = SurveyPack(stage=1)
        for k in KINDS:
            pool = by_kind[k]
            if len(pool) < CANDIDATES_PER_KIND:
                log.warning("only %d %s pairs available for %d candidates", len(pool), k.value, CANDIDATES_PER_KIND)
            chosen = rng.sample(pool, min(CANDIDATES_PER_KIND, len(pool)))
            pack.candidates[k.value] = sorted(p.id for p in chosen)
        return pack

    index = {p.id: p for p in pairs}
    unknown = [pid for pid in shortlist if pid not in index]
    if unknown:
        raise ValueError(f"shortlist names unknown pair ids: {unknown[:5]}")
    pack = SurveyPack(stage=2, questions=survey_questions())
    models = sorted(predictions)
    for k in KINDS:
        pool = sorted({pid for pid in shortlist if index[pid].kind == k})
        if len(pool) != SHORTLIST_PER_KIND:
            log.warning("shortlist has %d %s pairs, expected %d", len(pool), k.value, SHORTLIST_PER_KIND)
        for pid in rng.sample(pool, min(PROMPTS_PER_KIND, len(pool))):
            pair = index[pid]
            inp, ref = seq2seq_texts(pair)
            order = list(models)
            rng.shuffle(order)
            prompt_id = f"P{len(pack.prompts) + 1:02d}"
            labels = [chr(ord("A") + i) for i in range(len(order))]
            pack.prompts.append(
                {
                    "prompt_id": prompt_id,
                    "pair_id": pid,
                    "kind": k.value,
                    "input": inp,
                    "reference": ref,
                    "outputs": [
                        {"label": lab, "text": predictions[m].get(pid, "")} for lab, m in zip(labels, order)
                    ],
                }
            )
            pack.key[prompt_id] = dict(zip(labels, order))
    return pack
