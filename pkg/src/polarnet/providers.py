"""Annotation providers.

A provider answers one AnnotationRequest with one label out of the
request's closed label set. The HTTP provider speaks a small JSON
contract; the mock provider is a deterministic keyword scanner used for
tests, fixtures, and offline runs.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Optional, Protocol

from .errors import AnnotationError, TransportError


@dataclass(frozen=True)
class AnnotationRequest:
    template_id: str
    context: dict
    label_set: tuple[str, ...]


class AnnotationProvider(Protocol):
    def annotate(self, request: AnnotationRequest) -> str: ...


def annotate_with_retry(
    provider: AnnotationProvider, request: AnnotationRequest, retries: int = 3
) -> str:
    """Call the provider, rejecting labels outside the closed set.

    Invalid labels are retried up to ``retries`` times; exhausting them
    raises AnnotationError so the caller can record the item as unlabeled.
    Transport failures are not retried here.
    """
    last = None
    for _ in range(max(1, retries)):
        label = provider.annotate(request)
        if label in request.label_set:
            return label
        last = label
    raise AnnotationError(
        f"provider returned {last!r}, not in label set {list(request.label_set)}"
    )


# Keyword cues the mock provider keys on. The fixture generator embeds these
# tokens in synthetic post text, which makes the whole annotation stage a
# pure function of (corpus, seed) when the mock is selected.

THEME_CUES = {
    "tariff": "Economy, Trade & Labor",
    "minimum-wage": "Economy, Trade & Labor",
    "ottawa": "Economy, Trade & Labor",
    "maple-trade": "Economy, Trade & Labor",
    "ceasefire": "Defense & International Affairs",
    "zelensky": "Defense & International Affairs",
    "kyiv": "Defense & International Affairs",
    "gaza": "Defense & International Affairs",
    "westbank": "Defense & International Affairs",
    "pride": "Civil Rights",
    "trans-rights": "Civil Rights",
    "voting-rights": "Civil Rights",
    "inclusion": "Civil Rights",
    "hiring-quota": "Civil Rights",
    "diversity-office": "Civil Rights",
    "courthouse": "Law, Crime & Justice",
    "indictment": "Law, Crime & Justice",
    "police": "Law, Crime & Justice",
    "executive-order": "Government Operations & Administration",
    "whitehouse": "Government Operations & Administration",
    "oval-office": "Government Operations & Administration",
    "civil-service": "Government Operations & Administration",
    "wildfire": "Infrastructure & Environment",
    "palisades": "Infrastructure & Environment",
    "evacuation": "Infrastructure & Environment",
    "transit": "Infrastructure & Environment",
    "chatbot": "Science, Technology & Energy",
    "neural-net": "Science, Technology & Energy",
    "reactor": "Science, Technology & Energy",
    "bytedance": "Science, Technology & Energy",
    "scroll-ban": "Science, Technology & Energy",
    "starlink": "Science, Technology & Energy",
    "spacex": "Science, Technology & Energy",
    "doge-memo": "Government Operations & Administration",
    "medicaid": "Social Policy",
    "tuition": "Social Policy",
    "foodstamps": "Social Policy",
}

TOPIC_CUES = {
    "whitehouse": "trump_administration",
    "executive-order": "trump_administration",
    "oval-office": "trump_administration",
    "starlink": "elon_musk",
    "spacex": "elon_musk",
    "doge-memo": "elon_musk",
    "ottawa": "us_canada_relations",
    "tariff": "us_canada_relations",
    "maple-trade": "us_canada_relations",
    "palisades": "la_wildfires",
    "wildfire": "la_wildfires",
    "evacuation": "la_wildfires",
    "hiring-quota": "dei_programs",
    "inclusion": "dei_programs",
    "diversity-office": "dei_programs",
    "bytedance": "tiktok_ban",
    "scroll-ban": "tiktok_ban",
    "gaza": "israel_palestine",
    "westbank": "israel_palestine",
    "zelensky": "russia_ukraine",
    "kyiv": "russia_ukraine",
    "pride": "lgbtq_rights",
    "trans-rights": "lgbtq_rights",
    "chatbot": "ai",
    "neural-net": "ai",
}

STANCE_CUES = {
    "trump_administration": ("mandate-won", "resist-agenda"),
    "elon_musk": ("rocket-genius", "unplug-musk"),
    "us_canada_relations": ("strong-north", "annex-talk"),
    "la_wildfires": ("rebuild-together", "blame-mismanagement"),
    "dei_programs": ("equity-works", "merit-only"),
    "tiktok_ban": ("ban-it-now", "keep-scrolling"),
    "israel_palestine": ("free-palestine", "stand-with-israel"),
    "russia_ukraine": ("slava-ukraini", "z-victory"),
    "lgbtq_rights": ("love-wins", "traditional-values"),
    "ai": ("ship-models", "pause-ai"),
}


class MockProvider:
    """Deterministic provider: scans text for cue tokens.

    Themes and topics take the first cue found in cue-table order; stances
    use a majority vote of pro vs anti cues over the sampled posts, with
    neutral on a tie or when no cue appears.
    """

    def annotate(self, request: AnnotationRequest) -> str:
        if request.template_id == "theme_v1":
            return self._scan(request.context["text"], THEME_CUES, "Non-Political")
        if request.template_id == "topic_v1":
            return self._scan(request.context["text"], TOPIC_CUES, "other")
        if request.template_id == "stance_v1":
            return self._stance(request)
        raise AnnotationError(f"mock has no rule for template {request.template_id!r}")

    @staticmethod
    def _scan(text: str, cues: dict, default: str) -> str:
        lowered = text.lower()
        for token, label in cues.items():
            if token in lowered:
                return label
        return default

    @staticmethod
    def _stance(request: AnnotationRequest) -> str:
        ctx = request.context
        pro_cue, anti_cue = STANCE_CUES.get(ctx["topic"], ("", ""))
        pro = anti = 0
        for text in ctx["texts"]:
            lowered = text.lower()
            if pro_cue and pro_cue in lowered:
                pro += 1
            if anti_cue and anti_cue in lowered:
                anti += 1
        if pro > anti:
            return ctx["for_label"]
        if anti > pro:
            return ctx["against_label"]
        return ctx["neutral_label"]


class HttpProvider:
    """Client for the JSON annotation endpoint.

    Request body: {"template_id", "context", "label_set"}; expected
    response: {"label": "<one of label_set>"}. Endpoint and bearer token
    come from configuration or the documented environment variables.
    """

    def __init__(self, url: str, token: Optional[str] = None, timeout: float = 30.0):
        self.url = url
        self.token = token
        self.timeout = timeout

    def annotate(self, request: AnnotationRequest) -> str:
        body = json.dumps(
            {
                "template_id": request.template_id,
                "context": request.context,
                "label_set": list(request.label_set),
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise TransportError(f"annotation endpoint failed: {exc}") from exc
        label = payload.get("label")
        if not isinstance(label, str):
            raise TransportError(f"malformed provider response: {payload!r}")
        return label


def provider_from_spec(spec: str, token: Optional[str] = None) -> AnnotationProvider:
    """Build a provider from a CLI/config string: "mock" or an endpoint URL."""
    if spec == "mock":
        return MockProvider()
    if spec.startswith(("http://", "https://")):
        return HttpProvider(spec, token=token)
    raise ValueError(f"provider must be 'mock' or an http(s) URL, got {spec!r}")
