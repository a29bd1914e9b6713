"""Windowed calibration ratios over delivery streams and episode detection.

Calibration is the ratio of predicted to observed conversions inside a
time window (1.0 is ideal). Windows with zero observed conversions carry
an undefined ratio, which smoothing skips and episode runs treat as a
break. Episodes are maximal runs of windows whose smoothed ratio breaches
the threshold on one side; the event calendar is overlaid to name the
likely cause.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import EventCalendar, parse_utc, format_utc, resolve_event_window
from .errors import EmptyStreamError, FormatError, KTooLargeError


@dataclass(frozen=True)
class DeliveryEvent:
    ad_id: str
    predicted: float  # predicted conversion probability
    observed: int  # 1 if the conversion happened
    at: dt.datetime

    def __post_init__(self):
        if not 0.0 <= self.predicted <= 1.0:
            raise ValueError(f"predicted {self.predicted} outside [0, 1]")
        if self.observed not in (0, 1):
            raise ValueError(f"observed must be 0 or 1, got {self.observed}")


@dataclass
class CalibrationWindow:
    start: dt.datetime
    end: dt.datetime  # half-open
    sum_predicted: float
    sum_observed: int
    n: int

    @property
    def ratio(self) -> float | None:
        if self.sum_observed == 0:
            return None
        return self.sum_predicted / self.sum_observed


@dataclass
class Episode:
    start_window: int
    end_window: int  # inclusive
    direction: str  # "under" | "over"
    extreme_ratio: float  # min ratio for under, max for over
    overlapping_events: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "start_window": self.start_window,
            "end_window": self.end_window,
            "direction": self.direction,
            "extreme_ratio": self.extreme_ratio,
            "overlapping_events": self.overlapping_events,
        }


def window_ratios(
    events: list[DeliveryEvent], window_length: dt.timedelta
) -> list[CalibrationWindow]:
    """Bucket events into consecutive half-open windows from the earliest one.

    Sums are exact; windows between the first and last event with no
    traffic still appear (n = 0, undefined ratio).
    """
    if window_length <= dt.timedelta(0):
        raise ValueError("window_length must be positive")
    if not events:
        raise EmptyStreamError("delivery stream is empty")
    t0 = min(e.at for e in events)
    seconds = window_length.total_seconds()
    stamps = np.array([(e.at - t0).total_seconds() for e in events])
    idx = np.floor(stamps / seconds).astype(np.int64)
    n_windows = int(idx.max()) + 1
    predicted = np.array([e.predicted for e in events])
    observed = np.array([float(e.observed) for e in events])
    sum_pred = np.bincount(idx, weights=predicted, minlength=n_windows)
    sum_obs = np.bincount(idx, weights=observed, minlength=n_windows)
    counts = np.bincount(idx, minlength=n_windows)
    windows = []
    for i in range(n_windows):
        windows.append(
            CalibrationWindow(
                start=t0 + i * window_length,
                end=t0 + (i + 1) * window_length,
                sum_predicted=float(sum_pred[i]),
                sum_observed=int(sum_obs[i]),
                n=int(counts[i]),
            )
        )
    return windows


def smooth(windows: list[CalibrationWindow], k: int) -> list[float | None]:
    """Centered moving average of window ratios, width k (odd).

    Undefined ratios are skipped inside each averaging span; a span with
    no defined member yields None. Edges average over the truncated span,
    so the output has one entry per window.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be a positive odd integer")
    ratios = [w.ratio for w in windows]
    defined = sum(1 for r in ratios if r is not None)
    if k > defined:
        raise KTooLargeError(f"k={k} exceeds the {defined} defined-ratio windows")
    half = k // 2
    out: list[float | None] = []
    for i in range(len(ratios)):
        members = [
            r
            for r in ratios[max(0, i - half) : i + half + 1]
            if r is not None
        ]
        out.append(sum(members) / len(members) if members else None)
    return out


def detect_episodes(
    smoothed: list[float | None], delta: float, min_run: int
) -> list[Episode]:
    """Maximal runs of >= min_run windows breaching 1 +- delta on one side.

    Undefined windows break runs. ``extreme_ratio`` is the worst ratio in
    the run (minimum for under-calibration, maximum for over-).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if min_run < 1:
        raise ValueError("min_run must be positive")

    episodes: list[Episode] = []
    run_start = None
    run_dir = None

    def close(end_index: int):
        nonlocal run_start, run_dir
        if run_start is not None and end_index - run_start + 1 >= min_run:
            values = [smoothed[j] for j in range(run_start, end_index + 1)]
            extreme = min(values) if run_dir == "under" else max(values)
            episodes.append(Episode(run_start, end_index, run_dir, extreme))
        run_start = None
        run_dir = None

    for i, ratio in enumerate(smoothed):
        direction = None
        if ratio is not None:
            if ratio < 1.0 - delta:
                direction = "under"
            elif ratio > 1.0 + delta:
                direction = "over"
        if direction == run_dir and direction is not None:
            continue
        close(i - 1)
        if direction is not None:
            run_start = i
            run_dir = direction
    close(len(smoothed) - 1)
    return episodes


def overlay_calendar(
    episodes: list[Episode],
    windows: list[CalibrationWindow],
    calendar: EventCalendar,
    years: list[int],
) -> list[Episode]:
    """Attach every event whose resolved window intersects an episode's span."""
    def at_midnight(day: dt.date) -> dt.datetime:
        return dt.datetime(day.year, day.month, day.day, tzinfo=dt.timezone.utc)

    spans = []
    for event in calendar.seasonal_events():
        for year in years:
            start, end = resolve_event_window(event, year)
            spans.append((event.event_id, at_midnight(start), at_midnight(end)))
    out = []
    for ep in episodes:
        ep_start = windows[ep.start_window].start
        ep_end = windows[ep.end_window].end
        hits = sorted(
            {event_id for event_id, start, end in spans if start < ep_end and ep_start < end}
        )
        out.append(Episode(ep.start_window, ep.end_window, ep.direction, ep.extreme_ratio, hits))
    return out


def load_stream(path) -> list[DeliveryEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                events.append(
                    DeliveryEvent(
                        ad_id=obj["ad_id"],
                        predicted=float(obj["predicted"]),
                        observed=int(obj["observed"]),
                        at=parse_utc(obj["at"]),
                    )
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(str(exc), path=str(path), line=lineno) from None
    return events


def save_stream(events: list[DeliveryEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(
                json.dumps(
                    {
                        "ad_id": e.ad_id,
                        "predicted": e.predicted,
                        "observed": e.observed,
                        "at": format_utc(e.at),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def save_calibration_report(
    windows: list[CalibrationWindow],
    smoothed: list[float | None],
    episodes: list[Episode],
    report_path,
    series_path=None,
) -> None:
    """Structured episode report plus an optional plot-ready ratio series."""
    doc = {
        "windows": [
            {
                "start": format_utc(w.start),
                "end": format_utc(w.end),
                "sum_predicted": w.sum_predicted,
                "sum_observed": w.sum_observed,
                "n": w.n,
                "ratio": w.ratio,
                "smoothed": smoothed[i],
            }
            for i, w in enumerate(windows)
        ],
        "episodes": [ep.to_json() for ep in episodes],
    }
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if series_path is not None:
        with open(series_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window", "start", "ratio", "smoothed"])
            for i, w in enumerate(windows):
                writer.writerow(
                    [
                        i,
                        format_utc(w.start),
                        "" if w.ratio is None else repr(w.ratio),
                        "" if smoothed[i] is None else repr(smoothed[i]),
                    ]
                )
