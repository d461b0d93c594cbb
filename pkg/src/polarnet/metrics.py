"""Per-network polarization and homophily scores.

All scores are pure functions of an immutable graph view annotated with
group labels. Edge multiplicities always count; nodes without a label are
never scored. Undefined values (empty groups, zero densities) are
reported as None and rendered as dashes downstream.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .annotate import TopicSpec
from .graphs import TopicNetwork
from .groups import GroupComposition, Partition, StanceGrouping, group_composition


class GroupedGraphView:
    """A topic network together with a node -> group labeling.

    Only nodes present in the network and carrying a label are scored;
    edges with an unlabeled endpoint are invisible to every metric.
    """

    def __init__(self, graph: TopicNetwork, groups: Mapping):
        self.graph = graph
        self.groups = {n: g for n, g in groups.items() if n in graph.nodes}
        self.sizes = Counter(self.groups.values())

    def labeled_edges(self) -> Iterable[tuple]:
        groups = self.groups
        for (u, v), c in self.graph.multiplicity.items():
            gu = groups.get(u)
            if gu is None:
                continue
            gv = groups.get(v)
            if gv is None:
                continue
            yield u, v, gu, gv, c

    def restrict(self, keep: Iterable) -> "GroupedGraphView":
        keep = set(keep)
        return GroupedGraphView(
            self.graph, {n: g for n, g in self.groups.items() if g in keep}
        )


def aei(view: GroupedGraphView, x=None, y=None) -> Optional[float]:
    """Within-versus-between connection density contrast for two groups.

    d_int pools the ordered-pair edge densities inside x and inside y,
    d_ext is the cross density, and the score is their normalized
    difference in [-1, 1]: higher means connections concentrate within
    groups. None when there are no edges among the scored nodes.
    """
    if x is None or y is None:
        present = sorted(view.sizes)
        if len(present) != 2:
            raise ValueError(f"view has {len(present)} groups; pass x and y explicitly")
        x, y = present
    n_x = view.sizes.get(x, 0)
    n_y = view.sizes.get(y, 0)
    if n_x == 0 or n_y == 0:
        raise ValueError("both groups must be non-empty")
    if n_x + n_y < 2:
        raise ValueError("need at least two scored nodes")
    m_in = 0
    m_ext = 0
    for _u, _v, gu, gv, c in view.labeled_edges():
        if gu == x and gv == x or gu == y and gv == y:
            m_in += c
        elif (gu == x and gv == y) or (gu == y and gv == x):
            m_ext += c
    pairs_in = n_x * (n_x - 1) + n_y * (n_y - 1)
    pairs_ext = 2 * n_x * n_y
    d_int = m_in / pairs_in if pairs_in else 0.0
    d_ext = m_ext / pairs_ext if pairs_ext else 0.0
    total = d_int + d_ext
    if total == 0.0:
        return None
    return (d_int - d_ext) / total


@dataclass
class PairwiseAEI:
    """Symmetric between-group score matrix with its summary values."""

    labels: list
    values: dict
    mean: Optional[float]
    max: Optional[float]
    min: Optional[float]

    def get(self, r, s) -> Optional[float]:
        if r == s:
            return None
        key = (r, s) if (r, s) in self.values else (s, r)
        return self.values.get(key)


def pairwise_aei(view: GroupedGraphView) -> PairwiseAEI:
    """aei for every unordered pair of groups; empty when only one group."""
    labels = sorted(view.sizes)
    values: dict = {}
    defined = []
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            pair_view = view.restrict([labels[i], labels[j]])
            score = aei(pair_view, labels[i], labels[j])
            values[(labels[i], labels[j])] = score
            if score is not None:
                defined.append(score)
    if not defined:
        return PairwiseAEI(labels, values, None, None, None)
    return PairwiseAEI(
        labels, values, sum(defined) / len(defined), max(defined), min(defined)
    )


def assortativity(view: GroupedGraphView) -> Optional[float]:
    """Categorical assortativity over the directed mixing matrix.

    r = (sum_g e_gg - sum_g a_g b_g) / (1 - sum_g a_g b_g), where e is the
    fraction of edges from source group to target group and a, b are its
    row and column sums. None when all edge mass sits in one group.
    """
    e: dict = defaultdict(float)
    total = 0
    for _u, _v, gu, gv, c in view.labeled_edges():
        e[(gu, gv)] += c
        total += c
    if total == 0:
        return None
    a: dict = defaultdict(float)
    b: dict = defaultdict(float)
    for (gu, gv), w in e.items():
        frac = w / total
        e[(gu, gv)] = frac
        a[gu] += frac
        b[gv] += frac
    trace = sum(e.get((g, g), 0.0) for g in set(a) | set(b))
    ab = sum(a[g] * b.get(g, 0.0) for g in a)
    if 1.0 - ab == 0.0:
        return None
    return (trace - ab) / (1.0 - ab)


def coleman(view: GroupedGraphView, group) -> Optional[float]:
    """Coleman homophily index for one group.

    Compares the group's internal out-edge share w against the random
    baseline p = (n_g - 1)/(N - 1); positive values scale the excess by
    what is attainable, negative ones by the baseline. None when the
    group has no out-edges.
    """
    n_g = view.sizes.get(group, 0)
    if n_g == 0:
        raise ValueError(f"group {group!r} is empty")
    n_total = sum(view.sizes.values())
    if n_total <= 1:
        return None
    out_total = 0
    out_internal = 0
    for _u, _v, gu, gv, c in view.labeled_edges():
        if gu == group:
            out_total += c
            if gv == group:
                out_internal += c
    if out_total == 0:
        return None
    w = out_internal / out_total
    p = (n_g - 1) / (n_total - 1)
    if w >= p:
        if p == 1.0:
            return None
        return (w - p) / (1.0 - p)
    return (w - p) / p


def simpson(fractions: Mapping[str, float], include_neutral: bool = False) -> Optional[float]:
    """Probability two randomly drawn opposing-group members differ.

    By default neutral mass is set aside and the two opposing fractions
    are renormalized; 0.5 is the balanced maximum. None when no one holds
    an opposing stance. include_neutral switches to the plain three-group
    version.
    """
    if include_neutral:
        parts = {k: v for k, v in fractions.items() if v > 0}
    else:
        parts = {k: v for k, v in fractions.items() if k != "neutral" and v > 0}
    total = sum(parts.values())
    if total == 0:
        return None
    return 1.0 - sum((v / total) ** 2 for v in parts.values())


def stance_fractions(grouping: StanceGrouping) -> dict[str, float]:
    """for/neutral/against shares over the labeled nodes."""
    counts = Counter(grouping.assignment.values())
    labeled = sum(counts.values())
    if labeled == 0:
        return {"for": 0.0, "neutral": 0.0, "against": 0.0}
    return {s: counts.get(s, 0) / labeled for s in ("for", "neutral", "against")}


@dataclass
class MetricReport:
    """One row of the per-topic stance scoreboard."""

    topic: str
    fraction_a: float
    fraction_neutral: float
    fraction_b: float
    simpson: Optional[float]
    assortativity: Optional[float]
    aei: Optional[float]
    coleman_a: Optional[float]
    coleman_b: Optional[float]
    dominant_stance: str
    majority_camp: str
    coverage: float


def stance_metric_report(
    g: TopicNetwork,
    grouping: StanceGrouping,
    topic_spec: TopicSpec,
    include_neutral: bool = False,
    simpson_include_neutral: bool = False,
) -> MetricReport:
    """Assemble the stance-grouping scores for one topic network.

    A is the larger of the two opposing camps, B the smaller. Neutral
    nodes are excluded from the structural scores unless include_neutral
    adds them as their own category.
    """
    fractions = stance_fractions(grouping)
    camp_a, camp_b = ("for", "against")
    if fractions["against"] > fractions["for"]:
        camp_a, camp_b = ("against", "for")
    scored_groups = ("for", "neutral", "against") if include_neutral else ("for", "against")
    view = GroupedGraphView(
        g, {n: s for n, s in grouping.assignment.items() if s in scored_groups}
    )
    aei_score = None
    if view.sizes.get(camp_a) and view.sizes.get(camp_b):
        aei_score = aei(view.restrict([camp_a, camp_b]), camp_a, camp_b)
    coleman_a = coleman(view, camp_a) if view.sizes.get(camp_a) else None
    coleman_b = coleman(view, camp_b) if view.sizes.get(camp_b) else None
    dominant = max(
        ("for", "neutral", "against"), key=lambda s: (fractions[s], s == camp_a)
    )
    return MetricReport(
        topic=topic_spec.id,
        fraction_a=fractions[camp_a],
        fraction_neutral=fractions["neutral"],
        fraction_b=fractions[camp_b],
        simpson=simpson(fractions, include_neutral=simpson_include_neutral),
        assortativity=assortativity(view),
        aei=aei_score,
        coleman_a=coleman_a,
        coleman_b=coleman_b,
        dominant_stance=topic_spec.stance_display(dominant),
        majority_camp=topic_spec.stance_display(camp_a),
        coverage=grouping.coverage,
    )


@dataclass
class StructuralReport:
    """One row of the structural-grouping scoreboard."""

    topic: str
    mean_aei: Optional[float]
    max_aei: Optional[float]
    min_aei: Optional[float]
    n_groups: int
    max_ds: Optional[float]
    min_ds: Optional[float]
    pairwise: PairwiseAEI
    composition: GroupComposition


def structural_metric_report(
    g: TopicNetwork,
    partition: Partition,
    grouping: StanceGrouping,
) -> StructuralReport:
    view = GroupedGraphView(g, partition.assignment)
    pw = pairwise_aei(view)
    comp = group_composition(partition, grouping)
    return StructuralReport(
        topic=g.topic,
        mean_aei=pw.mean,
        max_aei=pw.max,
        min_aei=pw.min,
        n_groups=partition.b,
        max_ds=comp.max_ds,
        min_ds=comp.min_ds,
        pairwise=pw,
        composition=comp,
    )
