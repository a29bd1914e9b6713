"""Per-modality embedding access: store files, caching, provider fetches.

Embeddings are always computed outside this package (precomputed files or
an HTTP provider), keeping the core free of ML frameworks. A store file is
one modality: a header line ``modality dim model_id`` followed by
``ad_id v1 v2 ...`` lines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import requests

from .corpus import AdRecord
from .errors import DimMismatchError, EndpointError, FormatError

MODALITIES = ("text", "image")


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray  # float64, read-only
    modality: str
    model_id: str

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _freeze(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("embedding values must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding values must be finite")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


class EmbeddingStore:
    """Vectors keyed by (ad_id, modality), with uniform dims per modality."""

    def __init__(self):
        self._vectors: dict[tuple[str, str], EmbeddingVector] = {}
        self._dims: dict[str, int] = {}
        self._model_ids: dict[str, str] = {}

    def dim(self, modality: str) -> int | None:
        return self._dims.get(modality)

    def model_id(self, modality: str) -> str | None:
        return self._model_ids.get(modality)

    def get(self, ad_id: str, modality: str) -> EmbeddingVector | None:
        return self._vectors.get((ad_id, modality))

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def ids(self, modality: str) -> set[str]:
        return {ad for ad, mod in self._vectors if mod == modality}

    def put(self, ad_id: str, modality: str, values, model_id: str) -> EmbeddingVector:
        if modality not in MODALITIES:
            raise ValueError(f"unknown modality {modality!r}")
        if not ad_id or ad_id.split() != [ad_id]:
            # the embedding file format is whitespace-delimited
            raise ValueError(f"ad id {ad_id!r} must be non-empty without whitespace")
        arr = _freeze(values)
        expected = self._dims.get(modality)
        if expected is not None and arr.shape[0] != expected:
            raise DimMismatchError(
                f"{modality} vector for {ad_id!r} has dim {arr.shape[0]}, store has {expected}"
            )
        known_model = self._model_ids.get(modality)
        if known_model is not None and model_id != known_model:
            raise ValueError(
                f"{modality} model_id {model_id!r} differs from store's {known_model!r}"
            )
        self._dims.setdefault(modality, arr.shape[0])
        self._model_ids.setdefault(modality, model_id)
        vec = EmbeddingVector(arr, modality, model_id)
        self._vectors[(ad_id, modality)] = vec
        return vec


def load_store(*paths) -> EmbeddingStore:
    """Load one or more embedding files into a single validated store."""
    store = EmbeddingStore()
    for path in paths:
        read_into_store(store, path)
    return store


def read_into_store(store: EmbeddingStore, path) -> None:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header.strip():
            return  # empty file: nothing cached, queries all miss
        parts = header.split()
        if len(parts) != 3:
            raise FormatError("header must be 'modality dim model_id'", path=str(path), line=1)
        modality, dim_text, model_id = parts
        if modality not in MODALITIES:
            raise FormatError(f"unknown modality {modality!r}", path=str(path), line=1)
        try:
            dim = int(dim_text)
        except ValueError:
            raise FormatError(f"bad dim {dim_text!r}", path=str(path), line=1) from None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            ad_id, raw = fields[0], fields[1:]
            if len(raw) != dim:
                raise DimMismatchError(
                    f"vector for {ad_id!r} has {len(raw)} values, header says {dim}",
                    path=str(path),
                    line=lineno,
                )
            try:
                values = np.array([float(v) for v in raw], dtype=np.float64)
            except ValueError:
                raise FormatError("non-numeric vector value", path=str(path), line=lineno) from None
            try:
                store.put(ad_id, modality, values, model_id)
            except (DimMismatchError, ValueError) as exc:
                raise DimMismatchError(str(exc), path=str(path), line=lineno) from None


def save_store(store: EmbeddingStore, modality: str, path) -> None:
    """Write one modality of the store in the embedding file format."""
    ids = sorted(store.ids(modality))
    with open(path, "w", encoding="utf-8") as fh:
        if not ids:
            return
        fh.write(f"{modality} {store.dim(modality)} {store.model_id(modality)}\n")
        for ad_id in ids:
            vec = store.get(ad_id, modality)
            fh.write(ad_id + " " + " ".join(repr(v) for v in vec.values.tolist()) + "\n")


@dataclass
class FetchReport:
    requested: int = 0
    cached: int = 0
    fetched: int = 0
    missing_content: list[str] | None = None

    def __post_init__(self):
        if self.missing_content is None:
            self.missing_content = []


class HttpEmbeddingProvider:
    """Client for any provider honoring the /v1/embed wire shape."""

    def __init__(self, base_url: str, model_id: str = "remote", timeout: float = 60.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.timeout = timeout
        self._session = session or requests.Session()

    def embed(self, items: list[dict], modality: str) -> list[tuple[str, list[float]]]:
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/embed",
                json={"items": items, "modality": modality},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
            return [(v["id"], v["values"]) for v in vectors]
        except (requests.RequestException, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise EndpointError(f"embedding endpoint failed: {exc}") from exc


def fetch(
    ads: list[AdRecord],
    modality: str,
    provider,
    store: EmbeddingStore,
    texts: dict[str, str] | None = None,
    batch_size: int = 64,
) -> FetchReport:
    """Fill the store with vectors for the given ads and modality.

    Already-cached ids are never re-requested. Image requests for ads
    without an image_ref are reported per ad in the returned report and
    the batch continues. ``texts`` overrides the text sent per ad id
    (used for keyword-removed variants); the default is the ad's
    title+body content.
    """
    report = FetchReport(requested=len(ads))
    pending: list[dict] = []
    for ad in ads:
        if (ad.id, modality) in store:
            report.cached += 1
            continue
        if modality == "image":
            if not ad.image_ref:
                report.missing_content.append(ad.id)
                continue
            pending.append({"id": ad.id, "image_ref": ad.image_ref})
        else:
            text = texts[ad.id] if texts is not None else ad.content_text
            pending.append({"id": ad.id, "text": text})

    for start in range(0, len(pending), batch_size):
        chunk = pending[start : start + batch_size]
        for ad_id, values in provider.embed(chunk, modality):
            store.put(ad_id, modality, values, getattr(provider, "model_id", "remote"))
            report.fetched += 1
    return report
