"""Classification labels and the aggregation rules built on them.

Holds the closed label vocabularies (themes, parent topics, stances), the
operations that call an annotation provider, and the persisted label
stores. All enums are closed: stores and classifiers reject anything
outside them.
"""

from __future__ import annotations

import json
import random
import threading
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .errors import AnnotationError
from .ingest import PostRecord
from .providers import AnnotationProvider, AnnotationRequest, annotate_with_retry
from .templates import template_hash

NON_POLITICAL = "Non-Political"

THEMES = (
    "Civil Rights",
    "Defense & International Affairs",
    "Economy, Trade & Labor",
    "Government Operations & Administration",
    "Infrastructure & Environment",
    "Law, Crime & Justice",
    "Science, Technology & Energy",
    "Social Policy",
    NON_POLITICAL,
)

POLITICAL_THEMES = tuple(t for t in THEMES if t != NON_POLITICAL)

OTHER_TOPIC = "other"

STANCES = ("for", "neutral", "against")


@dataclass(frozen=True)
class TopicSpec:
    """One parent topic plus its stance display names.

    The canonical stance values are always for/neutral/against; the
    display names are what providers see and what reports print.
    """

    id: str
    name: str
    for_name: str
    against_name: str

    def stance_display(self, stance: str) -> str:
        if stance == "for":
            return self.for_name
        if stance == "against":
            return self.against_name
        return "Neutral"

    def label_set(self) -> tuple[str, str, str]:
        return (self.for_name, "neutral", self.against_name)

    def stance_from_label(self, label: str) -> str:
        if label == self.for_name:
            return "for"
        if label == self.against_name:
            return "against"
        if label == "neutral":
            return "neutral"
        raise ValueError(f"label {label!r} is not in {self.id}'s stance set")


DEFAULT_TOPICS = (
    TopicSpec("trump_administration", "Trump administration", "supports_trump", "opposes_trump"),
    TopicSpec("elon_musk", "Elon Musk", "supports_musk", "opposes_musk"),
    TopicSpec("us_canada_relations", "US-Canada relations", "supports_canada", "supports_us"),
    TopicSpec("la_wildfires", "LA wildfires", "supports_response", "opposes_response"),
    TopicSpec("dei_programs", "DEI programs", "supports_dei", "opposes_dei"),
    TopicSpec("tiktok_ban", "TikTok ban", "supports_ban", "opposes_ban"),
    TopicSpec("israel_palestine", "Israel-Palestine", "supports_palestine", "supports_israel"),
    TopicSpec("russia_ukraine", "Russia-Ukraine", "supports_ukraine", "supports_russia"),
    TopicSpec("lgbtq_rights", "LGBTQ+ rights", "supports_lgbtq", "opposes_lgbtq"),
    TopicSpec("ai", "AI", "supports_ai", "opposes_ai"),
)

PARENT_TOPIC_IDS = tuple(t.id for t in DEFAULT_TOPICS)


@dataclass(frozen=True)
class ThemeLabel:
    post_uri: str
    theme: str


@dataclass(frozen=True)
class TopicLabel:
    post_uri: str
    topic: str


@dataclass(frozen=True)
class StanceLabel:
    user: str
    topic: str
    stance: str


def classify_theme(
    post: PostRecord, provider: AnnotationProvider, retries: int = 3
) -> ThemeLabel:
    """Assign one of the closed themes to a post via the provider."""
    if not post.text:
        raise ValueError(f"post {post.uri} has empty text")
    request = AnnotationRequest(
        template_id="theme_v1",
        context={"text": post.text, "label_lines": "\n".join(THEMES)},
        label_set=THEMES,
    )
    theme = annotate_with_retry(provider, request, retries)
    return ThemeLabel(post.uri, theme)


def assign_topic(
    post: PostRecord,
    theme: ThemeLabel,
    provider: AnnotationProvider,
    topics: tuple[TopicSpec, ...] = DEFAULT_TOPICS,
    retries: int = 3,
) -> TopicLabel:
    """Reclassify a politically themed post into a parent topic (or other)."""
    if theme.post_uri != post.uri:
        raise ValueError("theme label belongs to a different post")
    if theme.theme == NON_POLITICAL:
        raise ValueError(f"post {post.uri} is not political; no topic to assign")
    label_set = tuple(t.id for t in topics) + (OTHER_TOPIC,)
    request = AnnotationRequest(
        template_id="topic_v1",
        context={"text": post.text, "label_lines": "\n".join(label_set)},
        label_set=label_set,
    )
    return TopicLabel(post.uri, annotate_with_retry(provider, request, retries))


def sample_user_posts(
    user: str, topic_corpus: list[PostRecord], k: int = 10, seed: int = 0
) -> list[PostRecord]:
    """Sample up to k of the user's topic posts, uniformly, seed-reproducible.

    The corpus is the user's authored-or-reposted posts inside one topic.
    Sorting by uri first makes the draw independent of input order.
    """
    if not topic_corpus:
        raise ValueError(f"user {user} has no posts in the topic corpus")
    ordered = sorted(topic_corpus, key=lambda p: p.uri)
    if len(ordered) <= k:
        return ordered
    rng = random.Random(f"{seed}:{user}")
    return rng.sample(ordered, k)


def classify_stance(
    user: str,
    sample: list[PostRecord],
    topic: TopicSpec,
    provider: AnnotationProvider,
    retries: int = 3,
) -> StanceLabel:
    """Assign for/neutral/against on one topic from the user's sampled posts."""
    if not sample:
        raise ValueError(f"empty post sample for user {user}")
    for_label, neutral_label, against_label = topic.label_set()
    request = AnnotationRequest(
        template_id="stance_v1",
        context={
            "texts": [p.text for p in sample],
            "topic": topic.id,
            "for_label": for_label,
            "neutral_label": neutral_label,
            "against_label": against_label,
        },
        label_set=topic.label_set(),
    )
    label = annotate_with_retry(provider, request, retries)
    return StanceLabel(user, topic.id, topic.stance_from_label(label))


@dataclass
class ThemeDistribution:
    counts: dict[str, int]
    total: int
    political_total: int
    share_of_all: dict[str, float]
    share_of_political: dict[str, float]


def theme_distribution(
    labels: Union[Iterable[ThemeLabel], Mapping[str, int]]
) -> ThemeDistribution:
    """Per-theme counts and shares, overall and among political posts only.

    Accepts either individual labels or a precomputed theme -> count
    mapping. When no post is political, the political-conditional shares
    are reported as an empty section.
    """
    if isinstance(labels, Mapping):
        counts = Counter(dict(labels))
    else:
        counts = Counter(label.theme for label in labels)
    unknown = set(counts) - set(THEMES)
    if unknown:
        raise ValueError(f"labels outside the theme vocabulary: {sorted(unknown)}")
    total = sum(counts.values())
    if total == 0:
        raise ValueError("no labels given")
    political_total = sum(counts[t] for t in POLITICAL_THEMES)
    share_all = {t: counts.get(t, 0) / total for t in THEMES}
    share_political = (
        {t: counts.get(t, 0) / political_total for t in POLITICAL_THEMES}
        if political_total
        else {}
    )
    return ThemeDistribution(
        counts=dict(counts),
        total=total,
        political_total=political_total,
        share_of_all=share_all,
        share_of_political=share_political,
    )


@dataclass
class ClusterRecord:
    """A semantic cluster of posts with its theme histogram."""

    cluster_id: str
    member_posts: list[str]
    theme_histogram: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.member_posts)


def classify_cluster(cluster: ClusterRecord, threshold: float = 0.75) -> bool:
    """True when the cluster is political.

    A cluster is apolitical when the Non-Political share reaches the
    threshold (boundary inclusive), political otherwise.
    """
    total = sum(cluster.theme_histogram.values())
    if total == 0:
        raise ValueError(f"cluster {cluster.cluster_id} has no labeled members")
    non_political = cluster.theme_histogram.get(NON_POLITICAL, 0)
    return (non_political / total) < threshold


class LabelStore:
    """Append-only, line-delimited JSON label store with a closed vocabulary.

    Writes are serialized by a lock; readers just scan the file. Each
    record carries the template hash of the prompt that produced it.
    """

    def __init__(self, path: Union[str, Path], vocab: Iterable[str], key_field: str):
        self.path = Path(path)
        self.vocab = frozenset(vocab)
        self.key_field = key_field
        self._lock = threading.Lock()

    def append(
        self,
        key: str,
        label: str,
        template_hash_value: str,
        timestamp: str,
        topic: Optional[str] = None,
    ) -> None:
        if label not in self.vocab:
            raise ValueError(f"label {label!r} not in store vocabulary")
        record = {self.key_field: key}
        if topic is not None:
            record["topic"] = topic
        record.update(
            {"label": label, "template_hash": template_hash_value, "timestamp": timestamp}
        )
        line = json.dumps(record, ensure_ascii=False, separators=(",", ":"))
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def load(self) -> list[dict]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        return records

    def mapping(self) -> dict:
        """Latest label per key (or per (key, topic) when topics present)."""
        out = {}
        for rec in self.load():
            key = rec[self.key_field]
            if "topic" in rec:
                out[(key, rec["topic"])] = rec["label"]
            else:
                out[key] = rec["label"]
        return out


def theme_store(path: Union[str, Path]) -> LabelStore:
    return LabelStore(path, THEMES, "post_uri")


def topic_store(path: Union[str, Path], topics: tuple[TopicSpec, ...] = DEFAULT_TOPICS) -> LabelStore:
    return LabelStore(path, tuple(t.id for t in topics) + (OTHER_TOPIC,), "post_uri")


def stance_store(path: Union[str, Path]) -> LabelStore:
    return LabelStore(path, STANCES, "user")


@dataclass
class AnnotationOutcome:
    """Batch result: labels plus the items skipped and why."""

    labeled: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)


def annotate_themes(
    posts: Iterable[PostRecord],
    provider: AnnotationProvider,
    store: LabelStore,
    retries: int = 3,
) -> AnnotationOutcome:
    outcome = AnnotationOutcome()
    h = template_hash("theme_v1")
    for post in posts:
        try:
            label = classify_theme(post, provider, retries)
        except (AnnotationError, ValueError) as exc:
            outcome.skipped.append((post.uri, str(exc)))
            continue
        store.append(post.uri, label.theme, h, post.created_at.isoformat())
        outcome.labeled += 1
    return outcome


def annotate_topics(
    posts: Iterable[PostRecord],
    themes: Mapping[str, str],
    provider: AnnotationProvider,
    store: LabelStore,
    topics: tuple[TopicSpec, ...] = DEFAULT_TOPICS,
    retries: int = 3,
) -> AnnotationOutcome:
    outcome = AnnotationOutcome()
    h = template_hash("topic_v1")
    for post in posts:
        theme = themes.get(post.uri)
        if theme is None or theme == NON_POLITICAL:
            continue
        try:
            label = assign_topic(post, ThemeLabel(post.uri, theme), provider, topics, retries)
        except (AnnotationError, ValueError) as exc:
            outcome.skipped.append((post.uri, str(exc)))
            continue
        store.append(post.uri, label.topic, h, post.created_at.isoformat())
        outcome.labeled += 1
    return outcome


def annotate_stances(
    corpora: Mapping[str, list[PostRecord]],
    topic: TopicSpec,
    provider: AnnotationProvider,
    store: LabelStore,
    k: int = 10,
    seed: int = 0,
    retries: int = 3,
) -> AnnotationOutcome:
    """Classify every user with a non-empty topic corpus.

    Users whose corpus is empty are skipped with a recorded reason. The
    stored timestamp is the latest sampled post's creation time, which
    keeps reruns byte-identical.
    """
    outcome = AnnotationOutcome()
    h = template_hash("stance_v1")
    for user in sorted(corpora):
        corpus = corpora[user]
        if not corpus:
            outcome.skipped.append((user, "empty topic corpus"))
            continue
        sample = sample_user_posts(user, corpus, k=k, seed=seed)
        try:
            label = classify_stance(user, sample, topic, provider, retries)
        except AnnotationError as exc:
            outcome.skipped.append((user, str(exc)))
            continue
        stamp = max(p.created_at for p in sample).isoformat()
        store.append(user, label.stance, h, stamp, topic=topic.id)
        outcome.labeled += 1
    return outcome
