"""Crowdsourced labeling round trip: export tasks, import votes, aggregate.

Vendors receive one task per ad and return one response per (task,
annotator). Aggregation is strict plurality; exact ties are reported as
ties rather than broken arbitrarily, since relatedness judgments are
subjective and a tie is information.
"""

from __future__ import annotations

import datetime as dt
import json
from collections import Counter
from dataclasses import dataclass

from .corpus import AdRecord, EventCalendar, LabeledExample, parse_utc, format_utc
from .errors import (
    FormatError,
    NoGoldPositivesError,
    TemplateError,
    UnknownLabelError,
    UnknownTaskError,
)

_TASK_PLACEHOLDERS = ("{title}", "{body}", "{events}")

DEFAULT_TASK_TEMPLATE = (
    "Read the ad below and pick the seasonal event it is tied to, "
    "or 'none' if it is not seasonal.\n\n"
    "Title: {title}\nBody: {body}\n\nEvents:\n{events}\n"
)


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    ad_id: str
    question_text: str
    candidate_labels: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "ad_id": self.ad_id,
            "question_text": self.question_text,
            "candidate_labels": list(self.candidate_labels),
            "chosen_label": None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotationTask":
        return cls(
            task_id=obj["task_id"],
            ad_id=obj["ad_id"],
            question_text=obj["question_text"],
            candidate_labels=tuple(obj["candidate_labels"]),
        )


@dataclass(frozen=True)
class AnnotatorResponse:
    task_id: str
    annotator_id: str
    chosen_label: str
    responded_at: dt.datetime

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "annotator_id": self.annotator_id,
            "chosen_label": self.chosen_label,
            "responded_at": format_utc(self.responded_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotatorResponse":
        return cls(
            task_id=obj["task_id"],
            annotator_id=obj["annotator_id"],
            chosen_label=obj["chosen_label"],
            responded_at=parse_utc(obj["responded_at"]),
        )


@dataclass(frozen=True)
class AggregatedLabel:
    ad_id: str
    event_id: str | None  # None when tied
    vote_fraction: float
    n_responses: int
    status: str  # "accepted" | "tied"

    def to_json(self) -> dict:
        return {
            "ad_id": self.ad_id,
            "event_id": self.event_id,
            "vote_fraction": self.vote_fraction,
            "n_responses": self.n_responses,
            "status": self.status,
        }


def export_tasks(
    ads: list[AdRecord], calendar: EventCalendar, template: str
) -> list[AnnotationTask]:
    """One task per ad with all calendar events as candidate labels.

    The template must contain {title}, {body}, and {events} placeholders;
    {events} expands to one "id: definition" line per event. Task ids are
    deterministic functions of the ad id.
    """
    missing = [p for p in _TASK_PLACEHOLDERS if p not in template]
    if missing:
        raise TemplateError(f"template missing placeholders: {', '.join(missing)}")
    event_lines = "\n".join(
        f"- {e.event_id}: {e.definition_text or e.display_name}" for e in calendar.events
    )
    labels = tuple(calendar.event_ids)
    tasks = []
    for ad in ads:
        question = template.format(title=ad.title, body=ad.body, events=event_lines)
        tasks.append(AnnotationTask(f"task-{ad.id}", ad.id, question, labels))
    return tasks


def aggregate_majority(
    responses: list[AnnotatorResponse], tasks: list[AnnotationTask]
) -> list[AggregatedLabel]:
    """Per-ad strict plurality vote; exact top ties get status "tied".

    Every response must reference an exported task. Output is sorted by
    ad_id.
    """
    by_task = {t.task_id: t for t in tasks}
    votes: dict[str, Counter[str]] = {}
    for resp in responses:
        task = by_task.get(resp.task_id)
        if task is None:
            raise UnknownTaskError(f"response references unknown task {resp.task_id!r}")
        if resp.chosen_label not in task.candidate_labels:
            raise UnknownLabelError(
                f"label {resp.chosen_label!r} not offered by task {resp.task_id!r}"
            )
        votes.setdefault(task.ad_id, Counter())[resp.chosen_label] += 1

    aggregated = []
    for ad_id in sorted(votes):
        counts = votes[ad_id]
        n = sum(counts.values())
        top = max(counts.values())
        winners = [label for label, c in counts.items() if c == top]
        if len(winners) == 1:
            aggregated.append(AggregatedLabel(ad_id, winners[0], top / n, n, "accepted"))
        else:
            aggregated.append(AggregatedLabel(ad_id, None, top / n, n, "tied"))
    return aggregated


def score_against_gold(
    labels: list[AggregatedLabel], gold: list[LabeledExample], target_event: str
) -> tuple[float, float, float]:
    """Binary precision/recall/F1 with target_event as the positive class.

    Tied aggregations count as negative predictions, as do gold ads with
    no aggregated label at all.
    """
    gold_by_ad = {g.ad_id: g.event_id for g in gold}
    positives = {ad for ad, ev in gold_by_ad.items() if ev == target_event}
    if not positives:
        raise NoGoldPositivesError(f"gold sample has no positives for {target_event!r}")
    predicted = {
        l.ad_id for l in labels if l.status == "accepted" and l.event_id == target_event
    }
    predicted &= set(gold_by_ad)
    tp = len(predicted & positives)
    precision = tp / len(predicted) if predicted else 0.0
    recall = tp / len(positives)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def aggregated_to_examples(
    labels: list[AggregatedLabel], labeled_at: dt.datetime
) -> list[LabeledExample]:
    """Accepted aggregations as human-sourced labels; ties are dropped."""
    return [
        LabeledExample(l.ad_id, l.event_id, "human", l.vote_fraction, labeled_at)
        for l in labels
        if l.status == "accepted"
    ]


def save_tasks(tasks: list[AnnotationTask], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task.to_json(), sort_keys=True) + "\n")


def load_tasks(path) -> list[AnnotationTask]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                tasks.append(AnnotationTask.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from None
    return tasks


def load_responses(path) -> list[AnnotatorResponse]:
    responses = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                responses.append(AnnotatorResponse.from_json(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from None
    return responses


def save_responses(responses: list[AnnotatorResponse], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for resp in responses:
            fh.write(json.dumps(resp.to_json(), sort_keys=True) + "\n")
