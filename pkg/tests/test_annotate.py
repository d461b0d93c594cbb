import json
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarnet.annotate import (
    DEFAULT_TOPICS,
    NON_POLITICAL,
    THEMES,
    ClusterRecord,
    StanceLabel,
    ThemeLabel,
    annotate_themes,
    assign_topic,
    classify_cluster,
    classify_stance,
    classify_theme,
    sample_user_posts,
    stance_store,
    theme_distribution,
    theme_store,
)
from polarnet.errors import AnnotationError, TransportError
from polarnet.ingest import PostRecord
from polarnet.providers import (
    AnnotationRequest,
    HttpProvider,
    MockProvider,
    annotate_with_retry,
    provider_from_spec,
)
from polarnet.templates import render_template, template_hash

UTC = timezone.utc
TOPIC_BY_ID = {t.id: t for t in DEFAULT_TOPICS}


def post(uri, text, author="did:plc:a"):
    return PostRecord(uri, author, text, ("en",), datetime(2025, 1, 5, tzinfo=UTC), 1)


class FlakyProvider:
    """Returns junk a fixed number of times, then a valid label."""

    def __init__(self, junk_rounds, good_label):
        self.junk_rounds = junk_rounds
        self.good_label = good_label
        self.calls = 0

    def annotate(self, request):
        self.calls += 1
        if self.calls <= self.junk_rounds:
            return "??" + self.good_label
        return self.good_label


class TestMockProvider:
    def test_tariff_maps_to_economy(self):
        label = classify_theme(post("p1", "new tariff schedule dropped"), MockProvider())
        assert label.theme == "Economy, Trade & Labor"

    def test_no_cue_is_non_political(self):
        label = classify_theme(post("p1", "my cat sat on the keyboard"), MockProvider())
        assert label.theme == NON_POLITICAL

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            classify_theme(post("p1", ""), MockProvider())

    def test_zelensky_maps_to_russia_ukraine(self):
        p = post("p1", "Zelensky spoke about kyiv today")
        theme = classify_theme(p, MockProvider())
        topic = assign_topic(p, theme, MockProvider())
        assert topic.topic == "russia_ukraine"

    def test_no_topic_cue_falls_to_other(self):
        p = post("p1", "the indictment was unsealed at the courthouse")
        theme = classify_theme(p, MockProvider())
        assert theme.theme == "Law, Crime & Justice"
        assert assign_topic(p, theme, MockProvider()).topic == "other"

    def test_apolitical_post_has_no_topic(self):
        p = post("p1", "sunset pics from the beach")
        theme = classify_theme(p, MockProvider())
        with pytest.raises(ValueError):
            assign_topic(p, theme, MockProvider())

    def test_stance_majority_cue(self):
        topic = TOPIC_BY_ID["russia_ukraine"]
        sample = [post(f"p{i}", "slava-ukraini, always") for i in range(7)]
        sample += [post(f"q{i}", "thinking about trains") for i in range(3)]
        label = classify_stance("did:plc:u", sample, topic, MockProvider())
        assert label == StanceLabel("did:plc:u", "russia_ukraine", "for")

    def test_stance_no_cue_is_neutral(self):
        topic = TOPIC_BY_ID["russia_ukraine"]
        sample = [post("p1", "sharing a recipe")]
        assert classify_stance("u", sample, topic, MockProvider()).stance == "neutral"

    def test_stance_anti_majority(self):
        topic = TOPIC_BY_ID["trump_administration"]
        sample = [post(f"p{i}", "resist-agenda rally tonight") for i in range(5)]
        assert classify_stance("u", sample, topic, MockProvider()).stance == "against"


class TestRetries:
    def test_invalid_labels_retried_then_accepted(self):
        provider = FlakyProvider(2, NON_POLITICAL)
        request = AnnotationRequest("theme_v1", {"text": "x"}, THEMES)
        assert annotate_with_retry(provider, request, retries=3) == NON_POLITICAL
        assert provider.calls == 3

    def test_exhausted_retries_raise(self):
        provider = FlakyProvider(99, NON_POLITICAL)
        request = AnnotationRequest("theme_v1", {"text": "x"}, THEMES)
        with pytest.raises(AnnotationError):
            annotate_with_retry(provider, request, retries=3)

    def test_batch_records_unlabeled(self, tmp_path):
        store = theme_store(tmp_path / "themes.jsonl")
        outcome = annotate_themes(
            [post("p1", "anything")], FlakyProvider(99, NON_POLITICAL), store
        )
        assert outcome.labeled == 0
        assert outcome.skipped[0][0] == "p1"


class TestThemeDistribution:
    # Aggregate counts for the published per-theme breakdown; the political
    # block sums to 5,522,980 of 43,652,579 posts.
    REPORTED = {
        NON_POLITICAL: 38_129_599,
        "Civil Rights": 1_509_130,
        "Defense & International Affairs": 1_560_553,
        "Economy, Trade & Labor": 693_207,
        "Government Operations & Administration": 332_586,
        "Infrastructure & Environment": 209_171,
        "Law, Crime & Justice": 891_571,
        "Science, Technology & Energy": 131_114,
        "Social Policy": 195_648,
    }

    def test_published_breakdown(self):
        dist = theme_distribution(self.REPORTED)
        assert dist.total == 43_652_579
        assert dist.political_total == 5_522_980
        assert dist.political_total / dist.total == pytest.approx(0.127, abs=5e-4)
        assert dist.share_of_political["Civil Rights"] == pytest.approx(0.273, abs=5e-4)
        assert dist.share_of_political["Defense & International Affairs"] == pytest.approx(
            0.283, abs=5e-4
        )

    def test_all_non_political_is_degenerate(self):
        dist = theme_distribution({NON_POLITICAL: 10})
        assert dist.political_total == 0
        assert dist.share_of_political == {}

    def test_even_split(self):
        dist = theme_distribution({"Civil Rights": 5, "Social Policy": 5})
        assert dist.share_of_political == pytest.approx(
            {**{t: 0.0 for t in dist.share_of_political}, "Civil Rights": 0.5, "Social Policy": 0.5}
        )

    def test_out_of_vocabulary_rejected(self):
        with pytest.raises(ValueError):
            theme_distribution({"Sports": 3})

    @given(st.lists(st.sampled_from(THEMES), min_size=1, max_size=60))
    def test_shares_sum_to_one_and_order_invariant(self, themes):
        labels = [ThemeLabel(f"p{i}", t) for i, t in enumerate(themes)]
        dist = theme_distribution(labels)
        assert abs(sum(dist.share_of_all.values()) - 1.0) < 1e-9
        if dist.political_total:
            assert abs(sum(dist.share_of_political.values()) - 1.0) < 1e-9
        reordered = theme_distribution(list(reversed(labels)))
        assert reordered.share_of_all == dist.share_of_all


class TestClusterRule:
    def cluster(self, non_political, total):
        hist = {NON_POLITICAL: non_political, "Civil Rights": total - non_political}
        return ClusterRecord("c1", [f"p{i}" for i in range(total)], hist)

    def test_eighty_percent_apolitical(self):
        assert classify_cluster(self.cluster(80, 100)) is False

    def test_boundary_is_inclusive(self):
        assert classify_cluster(self.cluster(75, 100)) is False

    def test_just_under_threshold_is_political(self):
        assert classify_cluster(self.cluster(74, 100)) is True

    def test_zero_non_political(self):
        assert classify_cluster(self.cluster(0, 100)) is True

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValueError):
            classify_cluster(ClusterRecord("c0", [], {}))

    @given(
        st.integers(0, 50),
        st.integers(1, 50),
        st.floats(0.05, 0.95),
        st.floats(0.0, 0.95),
    )
    def test_monotone_in_threshold(self, np_count, pol_count, threshold, bump):
        c = ClusterRecord(
            "c", ["p"] * (np_count + pol_count),
            {NON_POLITICAL: np_count, "Social Policy": pol_count},
        )
        # raising the threshold can only flip apolitical -> political
        lo = classify_cluster(c, threshold)
        hi = classify_cluster(c, min(threshold + bump, 1.0))
        if lo:
            assert hi


class TestSampleUserPosts:
    def test_small_corpus_returned_whole(self):
        corpus = [post(f"p{i}", "t") for i in range(3)]
        assert len(sample_user_posts("u", corpus, k=10, seed=1)) == 3

    def test_exactly_k_reproducible(self):
        corpus = [post(f"p{i:03d}", "t") for i in range(100)]
        a = sample_user_posts("u", corpus, k=10, seed=4)
        b = sample_user_posts("u", corpus, k=10, seed=4)
        assert len(a) == 10 and a == b

    def test_different_seeds_same_size(self):
        corpus = [post(f"p{i:03d}", "t") for i in range(40)]
        a = sample_user_posts("u", corpus, k=10, seed=1)
        b = sample_user_posts("u", corpus, k=10, seed=2)
        assert len(a) == len(b) == 10

    def test_order_independent(self):
        corpus = [post(f"p{i:03d}", "t") for i in range(40)]
        a = sample_user_posts("u", corpus, k=10, seed=9)
        b = sample_user_posts("u", list(reversed(corpus)), k=10, seed=9)
        assert a == b

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            sample_user_posts("u", [], k=10, seed=0)


class TestLabelStore:
    def test_round_trip_and_mapping(self, tmp_path):
        store = stance_store(tmp_path / "stances.jsonl")
        store.append("did:plc:u1", "for", "abc123", "2025-01-05T00:00:00+00:00",
                     topic="russia_ukraine")
        store.append("did:plc:u2", "neutral", "abc123", "2025-01-05T00:00:00+00:00",
                     topic="russia_ukraine")
        assert store.mapping() == {
            ("did:plc:u1", "russia_ukraine"): "for",
            ("did:plc:u2", "russia_ukraine"): "neutral",
        }
        raw = (tmp_path / "stances.jsonl").read_text().splitlines()
        assert json.loads(raw[0])["template_hash"] == "abc123"

    def test_out_of_vocabulary_rejected(self, tmp_path):
        store = theme_store(tmp_path / "themes.jsonl")
        with pytest.raises(ValueError):
            store.append("p1", "Sports", "h", "2025-01-05T00:00:00+00:00")

    def test_concurrent_appends_stay_line_atomic(self, tmp_path):
        from concurrent.futures import ThreadPoolExecutor

        store = theme_store(tmp_path / "themes.jsonl")

        def write(i):
            store.append(f"p{i:04d}", NON_POLITICAL, "h", "2025-01-05T00:00:00+00:00")

        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(write, range(200)))
        records = store.load()
        assert len(records) == 200
        assert {r["post_uri"] for r in records} == {f"p{i:04d}" for i in range(200)}

    def test_template_hash_is_stable(self):
        assert template_hash("theme_v1") == template_hash("theme_v1")
        assert template_hash("theme_v1") != template_hash("stance_v1")

    def test_render_template_substitutes(self):
        text = render_template(
            "stance_v1",
            {
                "topic": "russia_ukraine",
                "texts": "- a\n- b",
                "for_label": "supports_ukraine",
                "neutral_label": "neutral",
                "against_label": "supports_russia",
            },
        )
        assert "supports_ukraine" in text and "russia_ukraine" in text


class _Endpoint(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.server.seen.append((self.headers.get("Authorization"), body))
        label = body["label_set"][0]
        payload = json.dumps({"label": label}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def endpoint():
    server = HTTPServer(("127.0.0.1", 0), _Endpoint)
    server.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


class TestHttpProvider:
    def test_contract_round_trip(self, endpoint):
        url = f"http://127.0.0.1:{endpoint.server_address[1]}/annotate"
        provider = HttpProvider(url, token="sekrit")
        request = AnnotationRequest("theme_v1", {"text": "hi"}, THEMES)
        label = provider.annotate(request)
        assert label == THEMES[0]
        auth, body = endpoint.seen[0]
        assert auth == "Bearer sekrit"
        assert body == {
            "template_id": "theme_v1",
            "context": {"text": "hi"},
            "label_set": list(THEMES),
        }

    def test_unreachable_is_transport_error(self):
        provider = HttpProvider("http://127.0.0.1:9/annotate", timeout=0.5)
        with pytest.raises(TransportError):
            provider.annotate(AnnotationRequest("theme_v1", {"text": "x"}, THEMES))

    def test_provider_from_spec(self):
        assert isinstance(provider_from_spec("mock"), MockProvider)
        assert isinstance(provider_from_spec("http://x/y"), HttpProvider)
        with pytest.raises(ValueError):
            provider_from_spec("ftp://nope")
