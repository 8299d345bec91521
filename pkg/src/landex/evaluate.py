"""Precision/recall/F1 over per-document field predictions.

A ``None`` prediction is an abstention: it costs recall but never
precision. A non-``None`` prediction on a document whose gold value is
undefined counts as incorrect, while abstaining there is neutral.
Values compare at the JSON level, so a list field must match element
for element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping

from .docmodel import DocumentError


@dataclass(frozen=True)
class EvalReport:
    field: str
    correct: int
    incorrect: int
    bottom: int       # abstentions on documents with a defined gold value
    defined: int      # documents whose gold value is defined

    @property
    def precision(self) -> float:
        attempted = self.correct + self.incorrect
        return self.correct / attempted if attempted else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.defined if self.defined else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def evaluate_field(field: str, predictions: Mapping[str, object],
                   gold: Mapping[str, object]) -> EvalReport:
    """Score one field; ``predictions`` may omit documents (treated as
    abstentions) but may not name unknown ones."""
    unknown = sorted(set(predictions) - set(gold))
    if unknown:
        raise DocumentError(f"predictions for unknown documents: {unknown}")
    correct = incorrect = bottom = defined = 0
    for doc_id, want in gold.items():
        got = predictions.get(doc_id)
        if want is not None:
            defined += 1
        if got is None:
            if want is not None:
                bottom += 1
            continue
        if got == want:
            correct += 1
        else:
            incorrect += 1
    return EvalReport(field=field, correct=correct, incorrect=incorrect,
                      bottom=bottom, defined=defined)


def evaluate(predictions: Mapping[str, Mapping[str, object]],
             gold: Mapping[str, Mapping[str, object]]) -> Dict[str, EvalReport]:
    """Per-field reports; both arguments map field -> doc_id -> value.

    Only fields that were predicted at all are scored — a bundle trained
    on one field shouldn't drag every other gold field in as zeros.
    """
    extra = sorted(set(predictions) - set(gold))
    if extra:
        raise DocumentError(f"predictions for unknown fields: {extra}")
    if not predictions:
        raise DocumentError("no predictions to evaluate")
    return {field: evaluate_field(field, by_doc, gold[field])
            for field, by_doc in sorted(predictions.items())}


def report_to_obj(report: EvalReport) -> dict:
    return {
        "field": report.field,
        "precision": round(report.precision, 6),
        "recall": round(report.recall, 6),
        "f1": round(report.f1, 6),
        "correct": report.correct,
        "incorrect": report.incorrect,
        "bottom": report.bottom,
        "defined": report.defined,
    }


def load_records(path: str | Path) -> Dict[str, Dict[str, object]]:
    """Read line-delimited ``{doc_id, field, value}`` records into a
    field -> doc_id -> value mapping (the shape `evaluate` takes)."""
    out: Dict[str, Dict[str, object]] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            doc_id, field, value = rec["doc_id"], rec["field"], rec["value"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DocumentError(f"{path}:{lineno}: bad record: {exc}") from exc
        by_doc = out.setdefault(field, {})
        if doc_id in by_doc:
            raise DocumentError(f"{path}:{lineno}: duplicate record for "
                                f"({doc_id}, {field})")
        by_doc[doc_id] = value
    return out
