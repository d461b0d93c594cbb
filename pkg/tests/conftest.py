import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from polarnet.config import config_from_dict
from polarnet.synthetic import make_event_stream

FIXTURE_TOPICS = [
    {"id": "russia_ukraine", "name": "Russia-Ukraine",
     "for_name": "supports_ukraine", "against_name": "supports_russia"},
    {"id": "trump_administration", "name": "Trump administration",
     "for_name": "supports_trump", "against_name": "opposes_trump"},
    {"id": "tiktok_ban", "name": "TikTok ban",
     "for_name": "supports_ban", "against_name": "opposes_ban"},
    {"id": "ai", "name": "AI",
     "for_name": "supports_ai", "against_name": "opposes_ai"},
]


@pytest.fixture(scope="session")
def event_fixture(tmp_path_factory):
    """Bundled 10,000-event synthetic stream with its ground truth."""
    lines, truth = make_event_stream(seed=7)
    path = tmp_path_factory.mktemp("events") / "events.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path, truth


def fixture_config(event_path, out_root, seed=42):
    return config_from_dict(
        {
            "inputs": [str(event_path)],
            "out_dir": str(out_root),
            "seed": seed,
            "window": {"start": "2025-01-01", "end": "2025-04-01"},
            "topics": FIXTURE_TOPICS,
        }
    )
