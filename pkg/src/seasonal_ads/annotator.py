"""Multimodal model annotation: prompt building, response parsing, batching.

The model is an external chat-completion endpoint speaking
``POST /v1/generate`` with ``{prompt, image_ref?, max_tokens, temperature}``
and answering ``{text}``. Annotation is one binary yes/no query per
(ad, event). Responses are parsed leniently: a final "ANSWER: yes|no"
line is preferred, but a bare standalone yes/no is accepted because
untuned endpoints tend to be loquacious.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
import time
from dataclasses import dataclass, field

import requests

from .corpus import NON_SEASONAL, AdRecord, LabeledExample, SeasonalEvent
from .errors import EndpointError, TemplateError, UnparseableResponseError

logger = logging.getLogger(__name__)

_PLACEHOLDERS = ("{title}", "{body}", "{event_name}", "{event_definition}")
_ANSWER_LINE = re.compile(r"^\s*answer\s*:\s*(.*?)\s*$", re.IGNORECASE)
_STANDALONE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)

DEFAULT_SYSTEM_TEXT = (
    "You decide whether an advertisement is tied to a seasonal event. "
    "A seasonal ad is designed and scheduled to coincide with a particular "
    "season, event, or holiday. Think step by step before answering."
)
DEFAULT_USER_TEMPLATE = (
    "Event: {event_name}\n"
    "Event definition: {event_definition}\n\n"
    "Ad title: {title}\n"
    "Ad body: {body}\n\n"
    "Is this ad seasonal for the event above?"
)
DEFAULT_ANSWER_INSTRUCTION = 'End your reply with a final line "ANSWER: yes" or "ANSWER: no".'


@dataclass(frozen=True)
class PromptTemplate:
    system_text: str = DEFAULT_SYSTEM_TEXT
    user_template: str = DEFAULT_USER_TEMPLATE
    answer_instruction: str = DEFAULT_ANSWER_INSTRUCTION

    def __post_init__(self):
        missing = [p for p in _PLACEHOLDERS if p not in self.user_template]
        if missing:
            raise TemplateError(f"user_template missing placeholders: {', '.join(missing)}")
        if not self.answer_instruction:
            raise TemplateError("answer_instruction must be non-empty")

    @classmethod
    def from_json(cls, obj: dict) -> "PromptTemplate":
        return cls(
            system_text=obj.get("system_text", DEFAULT_SYSTEM_TEXT),
            user_template=obj.get("user_template", DEFAULT_USER_TEMPLATE),
            answer_instruction=obj.get("answer_instruction", DEFAULT_ANSWER_INSTRUCTION),
        )


@dataclass(frozen=True)
class InferenceRequest:
    prompt_text: str
    image_ref: str | None = None
    max_tokens: int = 256
    temperature: float = 0.0  # deterministic labeling by default

    def to_json(self) -> dict:
        body = {
            "prompt": self.prompt_text,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }
        if self.image_ref is not None:
            body["image_ref"] = self.image_ref
        return body


@dataclass(frozen=True)
class ParsedLabel:
    decision: str  # "yes" | "no"
    rationale: str | None
    raw_response: str


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 2
    backoff_base: float = 0.5  # seconds; doubles per retry
    timeout: float = 60.0
    max_in_flight: int = 1


def build_prompt(
    ad: AdRecord,
    event: SeasonalEvent,
    template: PromptTemplate,
    max_tokens: int = 256,
    temperature: float = 0.0,
) -> InferenceRequest:
    """Substitute ad and event fields into the template; forward image_ref."""
    user = template.user_template.format(
        title=ad.title,
        body=ad.body,
        event_name=event.display_name,
        event_definition=event.definition_text,
    )
    prompt = f"{template.system_text}\n\n{user}\n\n{template.answer_instruction}"
    return InferenceRequest(prompt, ad.image_ref, max_tokens, temperature)


def parse_response(raw: str) -> ParsedLabel:
    """Extract a yes/no decision from a free-form response.

    Rule 1: the last line with an "ANSWER:" prefix decides. Rule 2: the
    first standalone yes/no token decides. Text before the deciding
    position becomes the rationale.
    """
    lines = raw.splitlines()
    for i in range(len(lines) - 1, -1, -1):
        m = _ANSWER_LINE.match(lines[i])
        if m:
            verdict = m.group(1).strip().lower().rstrip(".!")
            if verdict in ("yes", "no"):
                rationale = "\n".join(lines[:i]).strip() or None
                return ParsedLabel(verdict, rationale, raw)
            break  # a malformed ANSWER line falls through to rule 2
    m = _STANDALONE.search(raw)
    if m:
        rationale = raw[: m.start()].strip() or None
        return ParsedLabel(m.group(1).lower(), rationale, raw)
    raise UnparseableResponseError(f"no decision found in response: {raw[:80]!r}")


class HttpInferenceClient:
    """Client for any endpoint honoring the /v1/generate wire shape."""

    def __init__(self, base_url: str, timeout: float = 60.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def generate(self, request: InferenceRequest) -> str:
        try:
            resp = self._session.post(
                f"{self.base_url}/v1/generate",
                json=request.to_json(),
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["text"]
        except (requests.RequestException, KeyError, json.JSONDecodeError) as exc:
            raise EndpointError(f"inference endpoint failed: {exc}") from exc


@dataclass(frozen=True)
class SkippedAd:
    ad_id: str
    reason: str


@dataclass
class AnnotationOutcome:
    labels: list[LabeledExample] = field(default_factory=list)
    skipped: list[SkippedAd] = field(default_factory=list)


def annotate_batch(
    ads: list[AdRecord],
    event: SeasonalEvent,
    client,
    policy: RetryPolicy = RetryPolicy(),
    template: PromptTemplate = PromptTemplate(),
    labeled_at: dt.datetime | None = None,
) -> AnnotationOutcome:
    """Label every ad yes/no for one event via the inference client.

    Unparseable responses are retried up to policy.max_retries, then the
    ad is recorded as skipped. Transport failures are retried with
    exponential backoff; if they persist, the batch aborts with an
    EndpointError carrying the partial outcome. Labels and skips
    partition the input; order is preserved.
    """
    stamp = labeled_at or dt.datetime.now(dt.timezone.utc)

    def annotate_one(ad: AdRecord):
        request = build_prompt(ad, event, template)
        for attempt in range(policy.max_retries + 1):
            try:
                raw = client.generate(request)
            except EndpointError as exc:
                if attempt == policy.max_retries:
                    raise EndpointError(
                        f"endpoint failed for ad {ad.id!r} after {attempt + 1} attempts: {exc}"
                    ) from exc
                logger.warning("retrying ad %s after transport error (%s)", ad.id, exc)
                time.sleep(policy.backoff_base * (2**attempt))
                continue
            try:
                return parse_response(raw)
            except UnparseableResponseError:
                logger.warning(
                    "unparseable response for ad %s (attempt %d/%d)",
                    ad.id,
                    attempt + 1,
                    policy.max_retries + 1,
                )
        return None

    if policy.max_in_flight > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=policy.max_in_flight) as pool:
            pending = [pool.submit(annotate_one, ad) for ad in ads]
        results = (fut.result for fut in pending)
    else:
        results = (lambda ad=ad: annotate_one(ad) for ad in ads)

    outcome = AnnotationOutcome()
    for ad, resolve in zip(ads, results):
        try:
            parsed = resolve()
        except EndpointError as exc:
            raise EndpointError(str(exc), partial=outcome) from exc
        if parsed is None:
            outcome.skipped.append(SkippedAd(ad.id, "unparseable response"))
            continue
        event_id = event.event_id if parsed.decision == "yes" else NON_SEASONAL
        outcome.labels.append(LabeledExample(ad.id, event_id, "mlm", 1.0, stamp))
    return outcome
