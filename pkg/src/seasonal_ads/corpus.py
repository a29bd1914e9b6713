"""Data model for ads, seasonal events, calendars, and labels.

Corpus and label files are UTF-8 JSON lines, one record per line, so they
can be streamed and diffed. The calendar is a single JSON document.
Loaded objects are immutable; share them freely across threads.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateIdError, FormatError, UncoveredYearError

LABEL_SOURCES = ("keyword", "human", "mlm", "model")

#: Reserved event id for the non-seasonal category.
NON_SEASONAL = "none"


def parse_utc(value: str) -> dt.datetime:
    """Parse an ISO-8601 timestamp as UTC; naive values are taken as UTC."""
    if not isinstance(value, str) or not value:
        raise ValueError(f"not a timestamp: {value!r}")
    text = value[:-1] + "+00:00" if value.endswith(("Z", "z")) else value
    stamp = dt.datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        return stamp.replace(tzinfo=dt.timezone.utc)
    return stamp.astimezone(dt.timezone.utc)


def format_utc(stamp: dt.datetime) -> str:
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone.utc)
    return stamp.astimezone(dt.timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class AdRecord:
    """One ad's multimodal content plus provenance fields."""

    id: str
    title: str
    body: str
    image_ref: str | None
    locale: str
    created_at: dt.datetime

    def __post_init__(self):
        if not self.id:
            raise ValueError("ad id must be non-empty")
        if self.title is None or self.body is None:
            raise ValueError(f"ad {self.id}: title and body may be empty but not absent")

    @property
    def content_text(self) -> str:
        """Title and body joined; the canonical text for matching and embedding."""
        return f"{self.title}\n{self.body}"

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "body": self.body,
            "image_ref": self.image_ref,
            "locale": self.locale,
            "created_at": format_utc(self.created_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AdRecord":
        for key in ("id", "title", "body", "locale", "created_at"):
            if key not in obj:
                raise ValueError(f"missing field {key!r}")
        return cls(
            id=obj["id"],
            title=obj["title"],
            body=obj["body"],
            image_ref=obj.get("image_ref"),
            locale=obj["locale"],
            created_at=parse_utc(obj["created_at"]),
        )


class FixedDate:
    """A date rule that repeats on the same month/day every year."""

    def __init__(self, month: int, day: int):
        dt.date(2001, month, day)  # validates; 2001 is not a leap year
        self.month = month
        self.day = day

    def date_for(self, year: int) -> dt.date:
        return dt.date(year, self.month, self.day)

    def to_json(self):
        return {"fixed": [self.month, self.day]}

    def __eq__(self, other):
        return isinstance(other, FixedDate) and (self.month, self.day) == (other.month, other.day)

    def __repr__(self):
        return f"FixedDate({self.month}, {self.day})"


class LookupTable:
    """An explicit year -> date table for movable events."""

    def __init__(self, dates: dict[int, dt.date]):
        self.dates = dict(dates)

    def date_for(self, year: int) -> dt.date:
        try:
            return self.dates[year]
        except KeyError:
            raise UncoveredYearError(f"no date for year {year}") from None

    def to_json(self):
        return {"lookup": {str(y): d.isoformat() for y, d in sorted(self.dates.items())}}

    def __eq__(self, other):
        return isinstance(other, LookupTable) and self.dates == other.dates

    def __repr__(self):
        return f"LookupTable({self.dates!r})"


def _date_rule_from_json(obj: dict):
    if "fixed" in obj:
        month, day = obj["fixed"]
        return FixedDate(int(month), int(day))
    if "lookup" in obj:
        return LookupTable({int(y): dt.date.fromisoformat(d) for y, d in obj["lookup"].items()})
    raise ValueError(f"unknown date_rule {obj!r}")


@dataclass(frozen=True)
class SeasonalEvent:
    """A named yearly event with its date rule and high-precision keywords."""

    event_id: str
    display_name: str
    date_rule: FixedDate | LookupTable | None
    duration_days: int
    primary_keywords: tuple[str, ...]
    definition_text: str = ""

    def __post_init__(self):
        if not self.event_id:
            raise ValueError("event_id must be non-empty")
        if self.duration_days < 1:
            raise ValueError(f"{self.event_id}: duration_days must be positive")
        for kw in self.primary_keywords:
            if kw != kw.lower():
                raise ValueError(f"{self.event_id}: keyword {kw!r} must be lowercase")
        if self.event_id == NON_SEASONAL:
            if self.primary_keywords:
                raise ValueError("the non-seasonal category has no primary keywords")
        elif not self.primary_keywords:
            raise ValueError(f"{self.event_id}: primary_keywords must be non-empty")

    def to_json(self) -> dict:
        return {
            "event_id": self.event_id,
            "display_name": self.display_name,
            "date_rule": self.date_rule.to_json() if self.date_rule else None,
            "duration_days": self.duration_days,
            "primary_keywords": list(self.primary_keywords),
            "definition_text": self.definition_text,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SeasonalEvent":
        rule = obj.get("date_rule")
        return cls(
            event_id=obj["event_id"],
            display_name=obj.get("display_name", obj["event_id"]),
            date_rule=_date_rule_from_json(rule) if rule else None,
            duration_days=int(obj.get("duration_days", 1)),
            primary_keywords=tuple(obj.get("primary_keywords", ())),
            definition_text=obj.get("definition_text", ""),
        )


def non_seasonal_event() -> SeasonalEvent:
    return SeasonalEvent(
        event_id=NON_SEASONAL,
        display_name="Non-seasonal",
        date_rule=None,
        duration_days=1,
        primary_keywords=(),
        definition_text="The ad is not tied to any seasonal event.",
    )


def resolve_event_window(event: SeasonalEvent, year: int) -> tuple[dt.date, dt.date]:
    """Half-open [start, end) date interval of the event in the given year.

    Fixed rules are year-independent; lookup rules consult the table and
    raise UncoveredYearError when the year is missing.
    """
    if event.date_rule is None:
        raise ValueError(f"event {event.event_id!r} has no date rule")
    start = event.date_rule.date_for(year)
    return start, start + dt.timedelta(days=event.duration_days)


class EventCalendar:
    """The event universe, always including the reserved ``none`` category."""

    def __init__(self, events: list[SeasonalEvent]):
        ids = [e.event_id for e in events]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValueError(f"duplicate event ids: {sorted(dupes)}")
        if NON_SEASONAL not in ids:
            events = list(events) + [non_seasonal_event()]
        self._events = {e.event_id: e for e in events}

    @property
    def events(self) -> list[SeasonalEvent]:
        return list(self._events.values())

    @property
    def event_ids(self) -> list[str]:
        return list(self._events)

    def seasonal_events(self) -> list[SeasonalEvent]:
        return [e for e in self._events.values() if e.event_id != NON_SEASONAL]

    def __contains__(self, event_id: str) -> bool:
        return event_id in self._events

    def __getitem__(self, event_id: str) -> SeasonalEvent:
        return self._events[event_id]

    def to_json(self) -> dict:
        return {"events": [e.to_json() for e in self._events.values()]}


@dataclass(frozen=True)
class LabeledExample:
    """One (ad, event) judgment with its provenance channel and confidence."""

    ad_id: str
    event_id: str
    source: str
    confidence: float
    labeled_at: dt.datetime

    def __post_init__(self):
        if self.source not in LABEL_SOURCES:
            raise ValueError(f"unknown label source {self.source!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "ad_id": self.ad_id,
            "event_id": self.event_id,
            "source": self.source,
            "confidence": self.confidence,
            "labeled_at": format_utc(self.labeled_at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LabeledExample":
        return cls(
            ad_id=obj["ad_id"],
            event_id=obj["event_id"],
            source=obj["source"],
            confidence=float(obj["confidence"]),
            labeled_at=parse_utc(obj["labeled_at"]),
        )


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", path=str(path), line=lineno) from None
            yield lineno, obj


def _dump_jsonl(objs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_corpus(path) -> list[AdRecord]:
    """Read a JSONL corpus file, preserving record order.

    Raises FormatError (with the offending line number) on malformed
    records and DuplicateIdError when two records share an id.
    """
    records: list[AdRecord] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        try:
            record = AdRecord.from_json(obj)
        except (ValueError, TypeError, KeyError) as exc:
            raise FormatError(str(exc), path=str(path), line=lineno) from None
        if record.id in seen:
            raise DuplicateIdError(f"duplicate ad id {record.id!r}", path=str(path), line=lineno)
        seen.add(record.id)
        records.append(record)
    return records


def save_corpus(records: list[AdRecord], path) -> None:
    _dump_jsonl((r.to_json() for r in records), path)


def load_calendar(path) -> EventCalendar:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", path=str(path)) from None
    try:
        events = [SeasonalEvent.from_json(e) for e in doc["events"]]
        return EventCalendar(events)
    except (ValueError, TypeError, KeyError) as exc:
        raise FormatError(str(exc), path=str(path)) from None


def save_calendar(calendar: EventCalendar, path) -> None:
    Path(path).write_text(json.dumps(calendar.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_labels(path) -> list[LabeledExample]:
    labels = []
    for lineno, obj in _iter_jsonl(path):
        try:
            labels.append(LabeledExample.from_json(obj))
        except (ValueError, TypeError, KeyError) as exc:
            raise FormatError(str(exc), path=str(path), line=lineno) from None
    return labels


def save_labels(labels: list[LabeledExample], path) -> None:
    _dump_jsonl((l.to_json() for l in labels), path)
