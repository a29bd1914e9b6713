"""End-to-end pipeline fixtures: a small corpus with class-separable
embedding files, written to disk in all the external formats."""

from __future__ import annotations

import datetime as dt
import hashlib
import json

import numpy as np

from seasonal_ads.corpus import AdRecord, save_calendar, save_corpus, save_labels, LabeledExample
from seasonal_ads.dataset import derive_removed_corpus
from seasonal_ads.embeddings import EmbeddingStore, save_store

from stubs import hash_vector

TS = dt.datetime(2023, 5, 1, 12, 0, tzinfo=dt.timezone.utc)

FILLER = ["sale", "deals", "shop", "today", "big", "save", "free", "best", "new", "offer"]

EVENT_SNIPPETS = {
    "easter": "Easter egg hunt specials",
    "fathers_day": "Father's Day grill set",
    "july_4th": "July 4th fireworks bundle",
    "memorial_day": "Memorial Day mattress blowout",
    "mothers_day": "Mother's Day flower bouquet",
    "valentines_day": "Valentine chocolate hearts",
    "none": "",
}


def class_signal(event_id: str, dim: int, scale: float = 3.0) -> np.ndarray:
    digest = hashlib.sha256(f"class-signal:{event_id}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return scale * rng.choice([-1.0, 1.0], size=dim)


def signal_vector(event_id: str, content: str, dim: int, model_id: str) -> np.ndarray:
    """Class-separable deterministic embedding: signal plus content hash."""
    return class_signal(event_id, dim) + 0.3 * hash_vector(content, dim, model_id)


def build_fixture(
    root,
    calendar,
    n_per_event: int = 24,
    n_none: int = 48,
    dim_text: int = 16,
    dim_image: int = 8,
    seed: int = 0,
):
    """Write corpus, calendar, labels, and embedding files under root.

    Returns a dict of paths plus the generated records. Every seasonal ad
    carries one of its event's primary keywords; embeddings carry a class
    signal that survives keyword removal (content-driven world).
    """
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ads, labels = [], []
    event_of = {}
    counter = 0
    event_ids = [e.event_id for e in calendar.seasonal_events()] + ["none"]
    for event_id in event_ids:
        count = n_none if event_id == "none" else n_per_event
        for _ in range(count):
            ad_id = f"ad{counter:05d}"
            counter += 1
            words = [FILLER[i] for i in rng.integers(0, len(FILLER), size=5)]
            title = EVENT_SNIPPETS[event_id] or " ".join(words[:2]).title()
            body = " ".join(words)
            image_ref = f"img-{ad_id}" if rng.random() < 0.7 else None
            ads.append(AdRecord(ad_id, title, body, image_ref, "en-US", TS))
            labels.append(LabeledExample(ad_id, event_id, "keyword", 1.0, TS))
            event_of[ad_id] = event_id
    order = rng.permutation(len(ads))
    ads = [ads[i] for i in order]
    labels = [labels[i] for i in order]

    paths = {
        "corpus": root / "corpus.jsonl",
        "calendar": root / "calendar.json",
        "labels": root / "labels.jsonl",
        "text_emb": root / "text.emb",
        "text_removed_emb": root / "text_removed.emb",
        "image_emb": root / "image.emb",
    }
    save_corpus(ads, paths["corpus"])
    save_calendar(calendar, paths["calendar"])
    save_labels(labels, paths["labels"])

    store = EmbeddingStore()
    removed_store = EmbeddingStore()
    removed = {ad.id: ad for ad in derive_removed_corpus(ads, calendar)}
    for ad in ads:
        event_id = event_of[ad.id]
        store.put(ad.id, "text", signal_vector(event_id, ad.content_text, dim_text, "fix-text"), "fix-text")
        removed_store.put(
            ad.id,
            "text",
            signal_vector(event_id, removed[ad.id].content_text, dim_text, "fix-text"),
            "fix-text",
        )
        if ad.image_ref:
            vec = signal_vector(event_id, ad.image_ref, dim_image, "fix-image")
            store.put(ad.id, "image", vec, "fix-image")
    save_store(store, "text", paths["text_emb"])
    save_store(removed_store, "text", paths["text_removed_emb"])
    save_store(store, "image", paths["image_emb"])

    paths["ads"] = ads
    paths["event_of"] = event_of
    return paths


def write_config(root, paths, **extra) -> str:
    config = {
        "paths": {
            "corpus": str(paths["corpus"]),
            "calendar": str(paths["calendar"]),
            "labels": str(paths["labels"]),
            "work_dir": str(root / "out"),
        },
        "embeddings": {
            "text": {"file": str(paths["text_emb"])},
            "image": {"file": str(paths["image_emb"])},
            "text_keywords_removed": {"file": str(paths["text_removed_emb"])},
        },
        "build": {"seed": 7},
        "train": {"seed": 7, "epochs": 20, "hidden_sizes": [32], "batch_size": 32},
    }
    for key, value in extra.items():
        section, _, leaf = key.partition(".")
        config.setdefault(section, {})[leaf] = value
    path = root / "config.json"
    path.write_text(json.dumps(config, indent=2))
    return str(path)
