"""Train/test construction: keyword removal, balancing, stratified splits.

All operations are deterministic functions of their inputs and a seed.
The ad_id partition into train and test is computed once per build; the
with_keywords and keywords_removed text variants are derived from that
single partition so no ad can leak between variants.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .corpus import NON_SEASONAL, AdRecord, EventCalendar, LabeledExample
from .errors import (
    ClassTooSmallError,
    EmptyPositivesError,
    FormatError,
    NTooLargeError,
)
from .keywords import token_spans, tokenize

WITH_KEYWORDS = "with_keywords"
KEYWORDS_REMOVED = "keywords_removed"
VARIANTS = (WITH_KEYWORDS, KEYWORDS_REMOVED)

#: Precedence when one ad carries labels from several channels.
SOURCE_PRECEDENCE = ("keyword", "human", "mlm", "model")


def _class_rng(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return np.random.default_rng([seed, int.from_bytes(digest[:8], "little")])


def remove_keywords(text: str, keywords: list[str]) -> str:
    """Delete every contiguous-token occurrence of each keyword phrase.

    Matching uses the same normalization as primary keyword detection, so
    removal and detection can never disagree about what counts as an
    occurrence. Whitespace around deletions collapses to a single space.
    """
    phrases = [p for p in (tokenize(kw) for kw in keywords) if p]
    if not phrases or not text:
        return text
    while True:
        spans = token_spans(text)
        tokens = [tok for tok, _, _ in spans]
        deleted: list[tuple[int, int]] = []
        i = 0
        while i < len(tokens):
            hit = None
            for phrase in phrases:
                if tokens[i : i + len(phrase)] == phrase:
                    if hit is None or len(phrase) > hit:
                        hit = len(phrase)
            if hit is None:
                i += 1
                continue
            deleted.append((spans[i][1], spans[i + hit - 1][2]))
            i += hit
        if not deleted:
            return text
        # Deleting a phrase can make two new tokens adjacent and create a
        # fresh occurrence, so rescan until the text is clean.
        text = _delete_spans(text, deleted)


def _delete_spans(text: str, spans: list[tuple[int, int]]) -> str:
    merged: list[list[int]] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    pieces = []
    pos = 0
    for start, end in merged:
        while start > pos and text[start - 1].isspace():
            start -= 1
        while end < len(text) and text[end].isspace():
            end += 1
        if text[pos:start]:
            pieces.append(text[pos:start])
        pos = end
    if text[pos:]:
        pieces.append(text[pos:])
    return " ".join(pieces)


def strip_ad_keywords(ad: AdRecord, keywords: list[str]) -> AdRecord:
    """The same ad with keyword phrases removed from title and body."""
    return AdRecord(
        id=ad.id,
        title=remove_keywords(ad.title, keywords),
        body=remove_keywords(ad.body, keywords),
        image_ref=ad.image_ref,
        locale=ad.locale,
        created_at=ad.created_at,
    )


@dataclass(frozen=True)
class BuildConfig:
    seed: int = 0
    test_fraction: float = 0.2
    target_positive_ratio: float = 0.5
    upsample_minority: bool = False
    volume_cap: int | None = None
    target_event: str | None = None  # binary mode when set

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if not 0.0 < self.target_positive_ratio < 1.0:
            raise ValueError("target_positive_ratio must be in (0, 1)")


@dataclass(frozen=True)
class DatasetSplit:
    name: str  # "train" | "test"
    examples: tuple[tuple[str, str], ...]  # (ad_id, event_id)
    variant: str = WITH_KEYWORDS
    seed: int = 0

    def __len__(self):
        return len(self.examples)

    def ad_ids(self) -> set[str]:
        return {ad_id for ad_id, _ in self.examples}

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, event_id in self.examples:
            counts[event_id] = counts.get(event_id, 0) + 1
        return counts

    def with_variant(self, variant: str) -> "DatasetSplit":
        return DatasetSplit(self.name, self.examples, variant, self.seed)


@dataclass
class BalanceResult:
    examples: list[tuple[str, str]]
    insufficient_negatives: bool = False


def balance_binary(
    pos: list[tuple[str, str]], neg: list[tuple[str, str]], config: BuildConfig
) -> BalanceResult:
    """Downsample negatives to hit the target positive ratio, then shuffle.

    Sampling is without replacement and seeded. When there are too few
    negatives, all of them are kept and the insufficient flag is set.
    """
    if not pos:
        raise EmptyPositivesError("no positive examples to balance around")
    ratio = config.target_positive_ratio
    needed = round(len(pos) * (1.0 - ratio) / ratio)
    rng = np.random.default_rng(config.seed)
    if needed >= len(neg):
        chosen = list(neg)
        short = needed > len(neg)
    else:
        idx = rng.choice(len(neg), size=needed, replace=False)
        chosen = [neg[i] for i in sorted(idx)]
        short = False
    combined = list(pos) + chosen
    order = rng.permutation(len(combined))
    return BalanceResult([combined[i] for i in order], short)


def upsample_minority(
    examples: list[tuple[str, str]], seed: int
) -> list[tuple[str, str]]:
    """Duplicate minority-class examples (with replacement) up to the majority count."""
    by_class: dict[str, list[tuple[str, str]]] = {}
    for ex in examples:
        by_class.setdefault(ex[1], []).append(ex)
    if not by_class:
        return []
    majority = max(len(v) for v in by_class.values())
    out = list(examples)
    for event_id in sorted(by_class):
        members = by_class[event_id]
        deficit = majority - len(members)
        if deficit == 0:
            continue
        rng = _class_rng(seed, event_id)
        picks = rng.integers(0, len(members), size=deficit)
        out.extend(members[i] for i in picks)
    return out


def split_stratified(
    examples: list[tuple[str, str]], config: BuildConfig
) -> tuple[DatasetSplit, DatasetSplit]:
    """Seeded per-class split with disjoint ad_ids.

    Each class contributes round(n * test_fraction) test examples,
    clamped so both sides keep at least one example per class.
    """
    by_class: dict[str, list[tuple[str, str]]] = {}
    for ex in examples:
        by_class.setdefault(ex[1], []).append(ex)
    train: list[tuple[str, str]] = []
    test: list[tuple[str, str]] = []
    for event_id in sorted(by_class):
        members = sorted(by_class[event_id])
        if len(members) < 2:
            raise ClassTooSmallError(
                f"class {event_id!r} has {len(members)} example(s); need at least 2"
            )
        rng = _class_rng(config.seed, event_id)
        order = rng.permutation(len(members))
        k = round(len(members) * config.test_fraction)
        k = min(max(k, 1), len(members) - 1)
        test.extend(members[i] for i in order[:k])
        train.extend(members[i] for i in order[k:])
    train.sort()
    test.sort()
    return (
        DatasetSplit("train", tuple(train), WITH_KEYWORDS, config.seed),
        DatasetSplit("test", tuple(test), WITH_KEYWORDS, config.seed),
    )


def subsample_train(split: DatasetSplit, n: int, seed: int) -> DatasetSplit:
    """Stratified subsample of exactly n examples (largest-remainder quotas)."""
    total = len(split.examples)
    if n > total:
        raise NTooLargeError(f"requested {n} examples from a split of {total}")
    if n == total:
        return DatasetSplit(split.name, split.examples, split.variant, seed)
    by_class: dict[str, list[tuple[str, str]]] = {}
    for ex in split.examples:
        by_class.setdefault(ex[1], []).append(ex)
    names = sorted(by_class)
    quotas = {c: n * len(by_class[c]) / total for c in names}
    counts = {c: int(quotas[c]) for c in names}
    leftover = n - sum(counts.values())
    for c in sorted(names, key=lambda c: (-(quotas[c] - counts[c]), c)):
        if leftover == 0:
            break
        if counts[c] < len(by_class[c]):
            counts[c] += 1
            leftover -= 1
    picked: list[tuple[str, str]] = []
    for c in names:
        members = sorted(by_class[c])
        rng = _class_rng(seed, c)
        idx = rng.choice(len(members), size=counts[c], replace=False)
        picked.extend(members[i] for i in sorted(idx))
    picked.sort()
    return DatasetSplit(split.name, tuple(picked), split.variant, seed)


def resolve_labels(labels: list[LabeledExample]) -> dict[str, str]:
    """One event per ad: highest-precision source wins, then confidence, then recency."""
    best: dict[str, LabeledExample] = {}
    rank = {s: i for i, s in enumerate(SOURCE_PRECEDENCE)}

    def key(label: LabeledExample):
        return (rank[label.source], -label.confidence, -label.labeled_at.timestamp(), label.event_id)

    for label in labels:
        cur = best.get(label.ad_id)
        if cur is None or key(label) < key(cur):
            best[label.ad_id] = label
    return {ad_id: label.event_id for ad_id, label in best.items()}


@dataclass
class DatasetBuild:
    train: DatasetSplit
    test: DatasetSplit
    seed: int
    insufficient_negatives: bool = False
    config: BuildConfig | None = None

    def splits(self, variant: str) -> tuple[DatasetSplit, DatasetSplit]:
        return self.train.with_variant(variant), self.test.with_variant(variant)


def build_dataset(
    labels: list[LabeledExample], calendar: EventCalendar, config: BuildConfig
) -> DatasetBuild:
    """Resolve labels, balance (binary mode), split, and optionally cap volume."""
    resolved = resolve_labels(labels)
    for event_id in set(resolved.values()):
        if event_id not in calendar:
            raise FormatError(f"label references unknown event {event_id!r}")
    insufficient = False
    if config.target_event is not None:
        pos = sorted((ad, config.target_event) for ad, ev in resolved.items() if ev == config.target_event)
        neg = sorted((ad, NON_SEASONAL) for ad, ev in resolved.items() if ev != config.target_event)
        balanced = balance_binary(pos, neg, config)
        insufficient = balanced.insufficient_negatives
        pool = balanced.examples
    else:
        pool = sorted((ad, ev) for ad, ev in resolved.items())
    train, test = split_stratified(pool, config)
    if config.upsample_minority:
        upsampled = upsample_minority(list(train.examples), config.seed)
        upsampled.sort()
        train = DatasetSplit("train", tuple(upsampled), train.variant, config.seed)
    if config.volume_cap is not None and config.volume_cap < len(train):
        train = subsample_train(train, config.volume_cap, config.seed)
    return DatasetBuild(train, test, config.seed, insufficient, config)


def derive_removed_corpus(
    corpus: list[AdRecord], calendar: EventCalendar, ad_ids: set[str] | None = None
) -> list[AdRecord]:
    """Keyword-removed variant records for the given ads (default: all)."""
    keywords: list[str] = []
    for event in calendar.seasonal_events():
        keywords.extend(event.primary_keywords)
    out = []
    for ad in corpus:
        if ad_ids is not None and ad.id not in ad_ids:
            continue
        out.append(strip_ad_keywords(ad, keywords))
    return out


def save_manifest(build: DatasetBuild, path) -> None:
    header = {
        "kind": "split_manifest",
        "seed": build.seed,
        "variants": list(VARIANTS),
        "insufficient_negatives": build.insufficient_negatives,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for split in (build.train, build.test):
            for ad_id, event_id in split.examples:
                fh.write(
                    json.dumps(
                        {"split": split.name, "ad_id": ad_id, "event_id": event_id},
                        sort_keys=True,
                    )
                    + "\n"
                )


def load_manifest(path) -> DatasetBuild:
    train: list[tuple[str, str]] = []
    test: list[tuple[str, str]] = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", path=str(path), line=lineno) from None
            if header is None:
                if obj.get("kind") != "split_manifest":
                    raise FormatError("first line must be the manifest header", path=str(path), line=lineno)
                header = obj
                continue
            try:
                pair = (obj["ad_id"], obj["event_id"])
            except KeyError as exc:
                raise FormatError(f"missing field {exc}", path=str(path), line=lineno) from None
            if obj.get("split") == "train":
                train.append(pair)
            elif obj.get("split") == "test":
                test.append(pair)
            else:
                raise FormatError(f"unknown split {obj.get('split')!r}", path=str(path), line=lineno)
    if header is None:
        raise FormatError("empty manifest", path=str(path))
    seed = int(header.get("seed", 0))
    return DatasetBuild(
        DatasetSplit("train", tuple(train), WITH_KEYWORDS, seed),
        DatasetSplit("test", tuple(test), WITH_KEYWORDS, seed),
        seed,
        bool(header.get("insufficient_negatives", False)),
    )
