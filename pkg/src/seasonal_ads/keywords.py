"""Primary keyword matching and lift-based secondary keyword mining.

Primary keywords give a high-precision slice of the corpus; secondary
candidates are ranked by smoothed lift of their token frequency in the
matched subset against the unmatched background. Candidates are emitted
for human review, never auto-accepted.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .corpus import AdRecord, LabeledExample, SeasonalEvent
from .errors import EmptyMatchedSetError, NoGoldOverlapError

# Word runs, keeping internal apostrophes so suffix forms can be normalized.
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*", re.UNICODE)
_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'"})


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens in order; apostrophe suffixes are dropped.

    "Valentine's" normalizes to "valentine"; hyphens and other punctuation
    split tokens.
    """
    if not text:
        return []
    lowered = text.translate(_APOSTROPHES).lower()
    return [m.group(0).partition("'")[0] for m in _TOKEN_RE.finditer(lowered)]


def token_spans(text: str) -> list[tuple[str, int, int]]:
    """(normalized token, start, end) character spans; used by keyword removal."""
    lowered = text.translate(_APOSTROPHES).lower()
    return [
        (m.group(0).partition("'")[0], m.start(), m.end())
        for m in _TOKEN_RE.finditer(lowered)
    ]


def contains_phrase(tokens: list[str], phrase_tokens: list[str]) -> bool:
    """True iff the phrase occurs as a contiguous token run."""
    if not phrase_tokens:
        return False
    n, m = len(tokens), len(phrase_tokens)
    for i in range(n - m + 1):
        if tokens[i : i + m] == phrase_tokens:
            return True
    return False


def match_primary(ad: AdRecord, event: SeasonalEvent) -> bool:
    """True iff any primary keyword phrase occurs contiguously in the ad text."""
    tokens = tokenize(f"{ad.title} {ad.body}")
    return any(contains_phrase(tokens, tokenize(kw)) for kw in event.primary_keywords)


def match_corpus(corpus: list[AdRecord], event: SeasonalEvent) -> set[str]:
    return {ad.id for ad in corpus if match_primary(ad, event)}


def default_stopwords() -> frozenset[str]:
    text = resources.files("seasonal_ads.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w and not w.startswith("#"))


def load_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w for w in fh.read().split() if w and not w.startswith("#"))


@dataclass(frozen=True)
class MiningParams:
    alpha: float = 1.0
    min_docs: int = 3
    max_keywords: int = 50
    ranking: str = "lift"  # or "frequency"
    stopwords: frozenset[str] = field(default_factory=default_stopwords)

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.ranking not in ("lift", "frequency"):
            raise ValueError(f"unknown ranking {self.ranking!r}")


@dataclass(frozen=True)
class TokenStats:
    token: str
    count_event: int
    count_background: int
    doc_freq_event: int
    lift: float

    def to_json(self) -> dict:
        return {
            "token": self.token,
            "count_event": self.count_event,
            "count_background": self.count_background,
            "doc_freq_event": self.doc_freq_event,
            "lift": self.lift,
        }


@dataclass(frozen=True)
class KeywordMatchReport:
    matched_ids: frozenset[str]
    precision_estimate: float | None = None
    coverage_estimate: float | None = None


def mine_secondary(
    corpus: list[AdRecord],
    matched_ids: set[str],
    params: MiningParams,
    primary_keywords: tuple[str, ...] = (),
) -> list[TokenStats]:
    """Rank secondary keyword candidates from the matched subset.

    lift(w) = ((c_e(w)+a) / (T_e+aV)) / ((c_b(w)+a) / (T_b+aV)) where c_e
    and c_b count w in the matched subset and the background (unmatched)
    docs, T_e/T_b are total token counts, V the combined vocabulary size,
    and a the smoothing constant. Primary keywords and stopwords are never
    emitted; tokens below min_docs event documents are dropped. Sorted by
    the configured ranking, ties broken lexicographically.
    """
    if not matched_ids:
        raise EmptyMatchedSetError("matched subset is empty")
    event_counts: Counter[str] = Counter()
    background_counts: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    for ad in corpus:
        tokens = tokenize(ad.content_text)
        if ad.id in matched_ids:
            event_counts.update(tokens)
            doc_freq.update(set(tokens))
        else:
            background_counts.update(tokens)

    total_event = sum(event_counts.values())
    total_background = sum(background_counts.values())
    vocab = len(set(event_counts) | set(background_counts))
    alpha = params.alpha

    excluded = set(params.stopwords)
    for phrase in primary_keywords:
        excluded.update(tokenize(phrase))

    stats = []
    for token, c_e in event_counts.items():
        if token in excluded or doc_freq[token] < params.min_docs:
            continue
        c_b = background_counts.get(token, 0)
        event_rate = (c_e + alpha) / (total_event + alpha * vocab)
        background_denom = total_background + alpha * vocab
        background_rate = (c_b + alpha) / background_denom if background_denom else 0.0
        lift = event_rate / background_rate if background_rate > 0 else math.inf
        stats.append(TokenStats(token, c_e, c_b, doc_freq[token], lift))

    if params.ranking == "frequency":
        stats.sort(key=lambda s: (-s.count_event, s.token))
    else:
        stats.sort(key=lambda s: (-s.lift, s.token))
    return stats[: params.max_keywords]


def estimate_quality(
    matched_ids: set[str], gold: list[LabeledExample], target_event: str
) -> KeywordMatchReport:
    """Precision and coverage of a matched set against gold labels.

    Precision is measured over the gold-covered part of the matched set;
    coverage over all gold positives.
    """
    gold_by_ad = {g.ad_id: g.event_id for g in gold}
    covered = matched_ids & set(gold_by_ad)
    if not covered:
        raise NoGoldOverlapError("no matched ad has a gold label")
    positives = {ad for ad, ev in gold_by_ad.items() if ev == target_event}
    hits = len(covered & positives)
    precision = hits / len(covered)
    coverage = hits / len(positives) if positives else None
    return KeywordMatchReport(frozenset(matched_ids), precision, coverage)


def save_keyword_report(stats: list[TokenStats], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in stats:
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")
