"""Topic interaction networks.

Builds the user-post bipartite structure for one topic and window,
projects it onto directed user-user multigraphs (one parallel edge per
interaction event), assembles the per-topic layer bundle, and handles
fast binary persistence for large graphs.
"""

from __future__ import annotations

import csv
import struct
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .ingest import PostRecord, RawEvent, RepostEvent

INTERACTION_KINDS = ("likes", "reposts", "follows", "blocks")

_MAGIC = b"PNETG1\x00"


@dataclass(frozen=True)
class EdgeRecord:
    source: str
    target: str
    timestamp: datetime


@dataclass(frozen=True)
class BipartiteEdge:
    user: str
    post_uri: str
    kind: str  # authorship | repost | like
    timestamp: datetime


@dataclass
class BipartiteInteractions:
    """User-post interactions for one (topic, window)."""

    topic: str
    window: Optional[tuple[datetime, datetime]]
    users: set
    posts: set
    edges: list[BipartiteEdge]
    dangling_references: int = 0


@dataclass
class TopicNetwork:
    """Directed user multigraph for one (topic, window, interaction type).

    Parallel edges are kept: ``multiplicity`` maps ordered user pairs to
    their edge count and is the source of truth for all metrics. The
    per-event list is retained when the graph was built from a stream so
    exports keep timestamps.
    """

    topic: str
    interaction: str
    window: Optional[tuple[datetime, datetime]]
    nodes: set
    multiplicity: Counter
    events: Optional[list[EdgeRecord]] = None
    suppressed_self_edges: int = 0

    @property
    def edge_count(self) -> int:
        return sum(self.multiplicity.values())

    @classmethod
    def from_events(
        cls,
        topic: str,
        interaction: str,
        window,
        events: Iterable[EdgeRecord],
        extra_nodes: Iterable = (),
    ) -> "TopicNetwork":
        events = list(events)
        mult = Counter((e.source, e.target) for e in events)
        nodes = {e.source for e in events} | {e.target for e in events} | set(extra_nodes)
        return cls(topic, interaction, window, nodes, mult, events)


@dataclass
class MultilayerBundle:
    """The (likes, reposts, follows, blocks) tuple for one (topic, window).

    Follow and block layers are induced on the union of the likes and
    reposts node sets.
    """

    topic: str
    window: Optional[tuple[datetime, datetime]]
    likes: TopicNetwork
    reposts: TopicNetwork
    follows: TopicNetwork
    blocks: TopicNetwork


@dataclass
class NetworkStats:
    nodes: int
    edges: int
    average_degree: float


def _in_window(ts: datetime, window) -> bool:
    if window is None:
        return True
    start, end = window
    return start <= ts < end


def build_bipartite(
    posts: Mapping[str, PostRecord],
    reposts: Iterable[RepostEvent],
    topic_labels: Mapping[str, str],
    topic: str,
    window: Optional[tuple[datetime, datetime]] = None,
    likes: Iterable[tuple[str, str, datetime]] = (),
) -> BipartiteInteractions:
    """Assemble the bipartite structure for one topic.

    Keeps authorship edges for posts labeled with the topic, plus repost
    and like edges pointing at those posts. Interactions referencing posts
    outside this topic corpus are dropped and tallied.
    """
    topic_posts = {
        uri: p
        for uri, p in posts.items()
        if topic_labels.get(uri) == topic and _in_window(p.created_at, window)
    }
    users = set()
    edges: list[BipartiteEdge] = []
    dangling = 0
    for uri, p in topic_posts.items():
        users.add(p.author)
        edges.append(BipartiteEdge(p.author, uri, "authorship", p.created_at))
    for r in reposts:
        if not _in_window(r.timestamp, window):
            continue
        if r.subject_uri not in topic_posts:
            dangling += 1
            continue
        users.add(r.reposter)
        edges.append(BipartiteEdge(r.reposter, r.subject_uri, "repost", r.timestamp))
    for liker, uri, ts in likes:
        if not _in_window(ts, window):
            continue
        if uri not in topic_posts:
            dangling += 1
            continue
        users.add(liker)
        edges.append(BipartiteEdge(liker, uri, "like", ts))
    return BipartiteInteractions(
        topic=topic,
        window=window,
        users=users,
        posts=set(topic_posts),
        edges=edges,
        dangling_references=dangling,
    )


def _project(b: BipartiteInteractions, kind: str, interaction: str,
             include_isolated: bool) -> TopicNetwork:
    authors = {e.post_uri: e.user for e in b.edges if e.kind == "authorship"}
    events: list[EdgeRecord] = []
    suppressed = 0
    for e in b.edges:
        if e.kind != kind:
            continue
        author = authors.get(e.post_uri)
        if author is None:
            continue
        if author == e.user:
            # interactions with one's own post carry no inter-user signal
            suppressed += 1
            continue
        events.append(EdgeRecord(e.user, author, e.timestamp))
    extra = b.users if include_isolated else ()
    net = TopicNetwork.from_events(b.topic, interaction, b.window, events, extra_nodes=extra)
    net.suppressed_self_edges = suppressed
    return net


def project_reposts(b: BipartiteInteractions, include_isolated: bool = False) -> TopicNetwork:
    """Project repost interactions onto a directed user multigraph.

    Every repost event becomes one edge from the reposter to the original
    author, so repeated reposts yield parallel edges. Self-reposts are
    suppressed and tallied. By default the node set is exactly the users
    incident to at least one retained edge; ``include_isolated`` adds all
    topic participants.
    """
    return _project(b, "repost", "reposts", include_isolated)


def project_likes(b: BipartiteInteractions, include_isolated: bool = False) -> TopicNetwork:
    return _project(b, "like", "likes", include_isolated)


def build_follow_block_layers(
    nodes: set,
    records: Iterable[RawEvent],
    topic: str = "",
    window: Optional[tuple[datetime, datetime]] = None,
) -> tuple[TopicNetwork, TopicNetwork]:
    """Follow and block layers induced on a shared node set.

    Only edges with both endpoints in ``nodes`` are retained; the layers
    share that node set even where it leaves isolates.
    """
    follow_events: list[EdgeRecord] = []
    block_events: list[EdgeRecord] = []
    for ev in records:
        if not ev.is_create or ev.collection not in ("follow", "block"):
            continue
        if not _in_window(ev.timestamp, window):
            continue
        target = ev.subject
        if target is None or ev.author not in nodes or target not in nodes:
            continue
        record = EdgeRecord(ev.author, target, ev.timestamp)
        (follow_events if ev.collection == "follow" else block_events).append(record)
    follows = TopicNetwork.from_events(topic, "follows", window, follow_events, extra_nodes=nodes)
    blocks = TopicNetwork.from_events(topic, "blocks", window, block_events, extra_nodes=nodes)
    return follows, blocks


def build_bundle(
    b: BipartiteInteractions,
    records: Iterable[RawEvent],
    include_isolated: bool = False,
) -> MultilayerBundle:
    likes = project_likes(b, include_isolated)
    reposts = project_reposts(b, include_isolated)
    shared = likes.nodes | reposts.nodes
    follows, blocks = build_follow_block_layers(shared, records, b.topic, b.window)
    return MultilayerBundle(b.topic, b.window, likes, reposts, follows, blocks)


def network_stats(g: TopicNetwork) -> NetworkStats:
    """Node count, edge multiset cardinality, and average degree 2|E|/|V|."""
    n = len(g.nodes)
    m = g.edge_count
    return NetworkStats(nodes=n, edges=m, average_degree=(2.0 * m / n) if n else 0.0)


# Persistence: a compact binary edge list plus a node-id dictionary, with a
# CSV export for interoperability. Timestamps are stored as epoch
# microseconds so reloads are bit-exact.


def write_nodes_tsv(nodes: Iterable, path: Union[str, Path]) -> list:
    ordered = sorted(nodes)
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, node in enumerate(ordered):
            fh.write(f"{i}\t{node}\n")
    return ordered


def read_nodes_tsv(path: Union[str, Path]) -> list:
    nodes = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            idx, node = line.rstrip("\n").split("\t", 1)
            assert int(idx) == len(nodes)
            nodes.append(node)
    return nodes


def _epoch_us(ts: datetime) -> int:
    return int(ts.timestamp() * 1_000_000)


def _from_epoch_us(us: int) -> datetime:
    return datetime.fromtimestamp(us / 1_000_000, tz=timezone.utc)


def save_graph(g: TopicNetwork, path: Union[str, Path], node_index: Mapping) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        if g.events is not None:
            fh.write(_MAGIC + b"E" + struct.pack("<I", len(g.events)))
            for e in g.events:
                fh.write(
                    struct.pack("<IIq", node_index[e.source], node_index[e.target],
                                _epoch_us(e.timestamp))
                )
        else:
            items = sorted(g.multiplicity.items())
            fh.write(_MAGIC + b"M" + struct.pack("<I", len(items)))
            for (u, v), c in items:
                fh.write(struct.pack("<IIQ", node_index[u], node_index[v], c))


def load_graph(
    path: Union[str, Path],
    nodes: Sequence,
    topic: str,
    interaction: str,
    window=None,
) -> TopicNetwork:
    path = Path(path)
    data = path.read_bytes()
    if data[: len(_MAGIC)] != _MAGIC:
        raise ValueError(f"{path} is not a graph file")
    mode = data[len(_MAGIC) : len(_MAGIC) + 1]
    (count,) = struct.unpack_from("<I", data, len(_MAGIC) + 1)
    offset = len(_MAGIC) + 5
    if mode == b"E":
        events = []
        for _ in range(count):
            s, t, us = struct.unpack_from("<IIq", data, offset)
            offset += 16
            events.append(EdgeRecord(nodes[s], nodes[t], _from_epoch_us(us)))
        return TopicNetwork.from_events(topic, interaction, window, events,
                                        extra_nodes=nodes)
    mult = Counter()
    for _ in range(count):
        s, t, c = struct.unpack_from("<IIQ", data, offset)
        offset += 16
        mult[(nodes[s], nodes[t])] = c
    return TopicNetwork(topic, interaction, window, set(nodes), mult)


def export_csv(g: TopicNetwork, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "timestamp"])
        if g.events is not None:
            for e in g.events:
                writer.writerow([e.source, e.target, e.timestamp.isoformat()])
        else:
            for (u, v), c in sorted(g.multiplicity.items()):
                for _ in range(c):
                    writer.writerow([u, v, ""])


def parse_window(spec: str) -> tuple[datetime, datetime]:
    """Parse a month-range spec like 2024-12:2025-05 into [start, end)."""
    start_s, end_s = spec.split(":")
    sy, sm = (int(x) for x in start_s.split("-"))
    ey, em = (int(x) for x in end_s.split("-"))
    start = datetime(sy, sm, 1, tzinfo=timezone.utc)
    if em == 12:
        end = datetime(ey + 1, 1, 1, tzinfo=timezone.utc)
    else:
        end = datetime(ey, em + 1, 1, tzinfo=timezone.utc)
    return start, end


def window_dirname(window: Optional[tuple[datetime, datetime]]) -> str:
    if window is None:
        return "all"
    start, end = window
    last_month = end.replace(day=1)
    # end is exclusive; the directory name shows the last covered month
    if last_month.month == 1:
        last_month = last_month.replace(year=last_month.year - 1, month=12)
    else:
        last_month = last_month.replace(month=last_month.month - 1)
    return f"{start:%Y-%m}_{last_month:%Y-%m}"
