"""Pipeline configuration.

One JSON config drives a full run. Every stochastic stage draws its seed
from the single master seed, and the hash of the semantic config fields
is stamped into every artifact so reruns are verifiable.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Optional, Union

from .annotate import DEFAULT_TOPICS, TopicSpec
from .errors import ConfigError
from .ingest import DEFAULT_DOWNTIME

STAGES = ("ingest", "annotate", "graph", "groups", "metrics", "crosstopic", "report")

PROVIDER_URL_ENV = "POLARNET_PROVIDER_URL"
PROVIDER_TOKEN_ENV = "POLARNET_PROVIDER_TOKEN"


@dataclass
class ProviderConfig:
    kind: str = "mock"  # mock | http
    url: Optional[str] = None

    def spec_string(self) -> str:
        if self.kind == "mock":
            return "mock"
        url = os.environ.get(PROVIDER_URL_ENV) or self.url
        if not url:
            raise ConfigError("http provider requires a url (or POLARNET_PROVIDER_URL)")
        return url

    def token(self) -> Optional[str]:
        return os.environ.get(PROVIDER_TOKEN_ENV)


@dataclass
class FilterConfig:
    min_reposts: int = 1
    min_chars: int = 5
    lang: str = "en"


@dataclass
class SampleConfig:
    fraction: float = 1.0
    stratify_by_day: bool = False


@dataclass
class DetectionConfig:
    max_groups: int = 5
    runs: int = 15
    iters: int = 50
    collapse_multigraph: bool = False


@dataclass
class MetricFlags:
    include_neutral: bool = False
    simpson_include_neutral: bool = False
    hypergraph_threshold: float = 0.2
    hypergraph_inclusive: bool = False
    nmi_normalization: str = "mean"


@dataclass
class PipelineConfig:
    inputs: list[str]
    out_dir: str
    seed: int
    window: Optional[tuple[datetime, datetime]] = None
    filters: FilterConfig = field(default_factory=FilterConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    topics: tuple[TopicSpec, ...] = DEFAULT_TOPICS
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    metrics: MetricFlags = field(default_factory=MetricFlags)
    stance_sample_k: int = 10
    annotate_on: str = "filtered"  # filtered | sampled
    downtime: dict = field(default_factory=lambda: dict(DEFAULT_DOWNTIME))

    def topic_by_id(self, topic_id: str) -> TopicSpec:
        for t in self.topics:
            if t.id == topic_id:
                return t
        raise ConfigError(f"unknown topic {topic_id!r}")


def _parse_date(raw: str) -> datetime:
    try:
        value = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ConfigError(f"bad date {raw!r}") from exc
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value


def load_config(path: Union[str, Path]) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    for key in ("inputs", "out_dir", "seed"):
        if key not in raw:
            raise ConfigError(f"config is missing required field {key!r}")
    if not isinstance(raw["seed"], int):
        raise ConfigError("seed must be an integer (stochastic stages require it)")

    window = None
    if raw.get("window"):
        w = raw["window"]
        window = (_parse_date(w["start"]), _parse_date(w["end"]))

    topics = DEFAULT_TOPICS
    if raw.get("topics"):
        try:
            topics = tuple(
                TopicSpec(t["id"], t.get("name", t["id"]),
                          t["for_name"], t["against_name"])
                for t in raw["topics"]
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad topic entry: {exc}") from exc

    def section(name, cls):
        data = raw.get(name, {})
        if not isinstance(data, dict):
            raise ConfigError(f"{name} must be an object")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad {name} section: {exc}") from exc

    sample = section("sample", SampleConfig)
    if not 0.0 < sample.fraction <= 1.0:
        raise ConfigError("sample.fraction must be in (0, 1]")

    downtime = dict(DEFAULT_DOWNTIME)
    if "downtime" in raw:
        downtime = {}
        for entry in raw["downtime"]:
            day = date.fromisoformat(entry["date"])
            downtime[day] = float(entry["observed_hours"]) / 24.0

    annotate_on = raw.get("annotate_on", "filtered")
    if annotate_on not in ("filtered", "sampled"):
        raise ConfigError("annotate_on must be 'filtered' or 'sampled'")

    return PipelineConfig(
        inputs=list(raw["inputs"]),
        out_dir=str(raw["out_dir"]),
        seed=raw["seed"],
        window=window,
        filters=section("filters", FilterConfig),
        sample=sample,
        provider=section("provider", ProviderConfig),
        topics=topics,
        detection=section("detection", DetectionConfig),
        metrics=section("metrics", MetricFlags),
        stance_sample_k=int(raw.get("stance_sample_k", 10)),
        annotate_on=annotate_on,
        downtime=downtime,
    )


def config_to_dict(config: PipelineConfig) -> dict:
    """Inverse of config_from_dict, for stamping configs into run dirs."""
    return {
        "inputs": config.inputs,
        "out_dir": config.out_dir,
        "seed": config.seed,
        "window": (
            {"start": config.window[0].isoformat(), "end": config.window[1].isoformat()}
            if config.window
            else None
        ),
        "filters": vars(config.filters),
        "sample": vars(config.sample),
        "provider": vars(config.provider),
        "topics": [vars(t) for t in config.topics],
        "detection": vars(config.detection),
        "metrics": vars(config.metrics),
        "stance_sample_k": config.stance_sample_k,
        "annotate_on": config.annotate_on,
        "downtime": [
            {"date": d.isoformat(), "observed_hours": f * 24.0}
            for d, f in sorted(config.downtime.items())
        ],
    }


def config_hash(config: PipelineConfig) -> str:
    """Hash of the semantic fields; out_dir is excluded so identical runs
    land on identical hashes wherever they are written."""
    payload = {
        "inputs": sorted(config.inputs),
        "seed": config.seed,
        "window": [d.isoformat() for d in config.window] if config.window else None,
        "filters": vars(config.filters),
        "sample": vars(config.sample),
        "provider": vars(config.provider),
        "topics": [vars(t) for t in config.topics],
        "detection": vars(config.detection),
        "metrics": vars(config.metrics),
        "stance_sample_k": config.stance_sample_k,
        "annotate_on": config.annotate_on,
        "downtime": {d.isoformat(): f for d, f in sorted(config.downtime.items())},
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def stage_seed(master_seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the master seed."""
    digest = hashlib.sha256(f"{master_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
