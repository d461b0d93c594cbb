"""Command-line interface.

``polarnet run`` drives the whole pipeline from one config file; the
other subcommands expose individual stages for ad-hoc use. Exit codes:
0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .annotate import (
    DEFAULT_TOPICS,
    annotate_stances,
    annotate_themes,
    annotate_topics,
    stance_store,
    theme_store,
    topic_store,
)
from .config import PipelineConfig, config_from_dict, load_config
from .errors import ConfigError, PolarnetError, StageError
from .graphs import (
    build_bipartite,
    export_csv,
    load_graph,
    network_stats,
    parse_window,
    project_reposts,
    read_nodes_tsv,
    save_graph,
    window_dirname,
    write_nodes_tsv,
)
from .groups import (
    Partition,
    StanceGrouping,
    content_groups,
    detect_structural_groups_with_diagnostics,
    group_composition,
)
from .ingest import (
    StatsAccumulator,
    build_post_records,
    filter_corpus,
    parse_stream,
    post_from_json,
    post_to_json,
    repost_from_json,
    repost_to_json,
    sample_corpus,
)
from .pipeline import run_dir_for, run_pipeline, stage_report
from .providers import provider_from_spec

log = logging.getLogger("polarnet")


def _read_events(patterns):
    files = []
    for pattern in patterns:
        matches = sorted(glob.glob(pattern))
        files.extend(Path(m) for m in matches) if matches else files.append(Path(pattern))
    for path in files:
        with path.open(encoding="utf-8") as fh:
            yield from parse_stream(fh)


def _load_posts_file(path):
    with Path(path).open(encoding="utf-8") as fh:
        return [post_from_json(line) for line in fh if line.strip()]


def _write_posts_file(posts, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in posts:
            fh.write(post_to_json(p) + "\n")


# --- ingest ----------------------------------------------------------------


def cmd_ingest_stats(args):
    window = None
    if args.window:
        start, end = parse_window(args.window)
        window = (start.date(), end.date())
    acc = StatsAccumulator(window=window)
    for event in _read_events(args.input):
        acc.add(event)
    stats = acc.finalize()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "activity_stats.json").write_text(
        json.dumps(
            {
                "observed_days": stats.observed_days,
                "window": [d.isoformat() for d in stats.window] if stats.window else None,
                "per_type": {k: asdict(v) for k, v in stats.per_type.items()},
                "non_create_events": stats.non_create_events,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    with (out / "activity_daily.csv").open("w", encoding="utf-8") as fh:
        fh.write("date,action_type,actions,distinct_authors\n")
        for (day, kind), (actions, authors) in sorted(stats.daily.items()):
            fh.write(f"{day.isoformat()},{kind},{actions},{authors}\n")
    print(f"wrote activity stats for {stats.observed_days:.2f} observed days to {out}")
    return 0


def cmd_ingest_filter(args):
    posts, reposts = build_post_records(_read_events(args.input))
    kept = filter_corpus(
        sorted(posts.values(), key=lambda p: p.uri),
        min_reposts=args.min_reposts,
        min_chars=args.min_chars,
        lang=args.lang,
    )
    _write_posts_file(kept, args.out)
    if args.reposts_out:
        with Path(args.reposts_out).open("w", encoding="utf-8") as fh:
            for r in sorted(reposts, key=lambda r: (r.timestamp, r.reposter, r.subject_uri)):
                fh.write(repost_to_json(r) + "\n")
    print(f"kept {len(kept)} of {len(posts)} posts")
    return 0


def cmd_ingest_sample(args):
    posts = _load_posts_file(args.input)
    sampled = sample_corpus(
        posts, fraction=args.fraction, seed=args.seed, stratify_by_day=args.stratify_by_day
    )
    _write_posts_file(sampled, args.out)
    print(f"sampled {len(sampled)} of {len(posts)} posts")
    return 0


# --- annotate ----------------------------------------------------------------


def cmd_annotate(args):
    provider = provider_from_spec(args.provider)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    posts = _load_posts_file(args.input)
    if args.what == "themes":
        store = theme_store(out / "themes.jsonl")
        outcome = annotate_themes(posts, provider, store)
    elif args.what == "topics":
        themes = theme_store(args.themes).mapping()
        store = topic_store(out / "topics.jsonl")
        outcome = annotate_topics(posts, themes, provider, store)
    else:  # stances
        topic_map = topic_store(args.topic_labels).mapping()
        reposts = []
        if args.reposts:
            with Path(args.reposts).open(encoding="utf-8") as fh:
                reposts = [repost_from_json(line) for line in fh if line.strip()]
        by_uri = {p.uri: p for p in posts}
        specs = [t for t in DEFAULT_TOPICS if args.topic in (None, t.id)]
        outcome = None
        for spec in specs:
            corpora = {}
            for uri, label in topic_map.items():
                if label == spec.id and uri in by_uri:
                    corpora.setdefault(by_uri[uri].author, []).append(by_uri[uri])
            for r in reposts:
                if topic_map.get(r.subject_uri) == spec.id and r.subject_uri in by_uri:
                    corpora.setdefault(r.reposter, []).append(by_uri[r.subject_uri])
            if not corpora:
                continue
            store = stance_store(out / f"stances_{spec.id}.jsonl")
            outcome = annotate_stances(
                corpora, spec, provider, store, k=args.k, seed=args.seed
            )
            print(f"{spec.id}: {outcome.labeled} users classified, "
                  f"{len(outcome.skipped)} skipped")
        return 0
    print(f"labeled {outcome.labeled}, skipped {len(outcome.skipped)}")
    return 0


# --- graph -------------------------------------------------------------------


def cmd_graph_build(args):
    posts = {p.uri: p for p in _load_posts_file(args.corpus)}
    with Path(args.reposts).open(encoding="utf-8") as fh:
        reposts = [repost_from_json(line) for line in fh if line.strip()]
    topic_map = topic_store(args.topic_labels).mapping()
    window = parse_window(args.window) if args.window else None
    if args.topics == "all":
        topic_ids = sorted({t for t in topic_map.values() if t != "other"})
    else:
        topic_ids = args.topics.split(",")
    out = Path(args.out)
    for topic_id in topic_ids:
        b = build_bipartite(posts, reposts, topic_map, topic_id, window)
        g = project_reposts(b, include_isolated=args.include_isolated)
        stats = network_stats(g)
        if stats.edges == 0:
            print(f"{topic_id}: empty network, skipped")
            continue
        topic_dir = out / topic_id / window_dirname(window)
        topic_dir.mkdir(parents=True, exist_ok=True)
        ordered = write_nodes_tsv(g.nodes, topic_dir / "nodes.tsv")
        index = {n: i for i, n in enumerate(ordered)}
        save_graph(g, topic_dir / f"{args.tau}.graph", index)
        export_csv(g, topic_dir / f"{args.tau}.csv")
        print(f"{topic_id}: |V|={stats.nodes} |E|={stats.edges} "
              f"avg_degree={stats.average_degree:.2f}")
    return 0


def cmd_graph_stats(args):
    root = Path(args.graphs)
    print("topic,window,nodes,edges,average_degree")
    for graph_file in sorted(root.glob("*/*/*.graph")):
        topic_dir = graph_file.parent
        nodes = read_nodes_tsv(topic_dir / "nodes.tsv")
        g = load_graph(graph_file, nodes, topic_dir.parent.name, graph_file.stem)
        s = network_stats(g)
        print(f"{topic_dir.parent.name},{topic_dir.name},{s.nodes},{s.edges},"
              f"{s.average_degree:.2f}")
    return 0


def _load_graph_dir(graphs_dir, topic, tau="reposts"):
    matches = sorted(Path(graphs_dir).glob(f"{topic}/*/{tau}.graph"))
    if not matches:
        raise ConfigError(f"no {tau} graph for topic {topic!r} under {graphs_dir}")
    graph_file = matches[0]
    nodes = read_nodes_tsv(graph_file.parent / "nodes.tsv")
    return load_graph(graph_file, nodes, topic, tau)


def cmd_groups_structural(args):
    g = _load_graph_dir(args.graphs, args.topic)
    partition, runs = detect_structural_groups_with_diagnostics(
        g, max_groups=args.max_groups, runs=args.runs, iters=args.iters,
        seed=args.seed, collapse_multigraph=args.collapse_multigraph,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "partition.tsv").open("w", encoding="utf-8") as fh:
        for node in sorted(partition.assignment):
            fh.write(f"{node}\t{partition.assignment[node]}\n")
    (out / "partition.json").write_text(
        json.dumps(
            {
                "topic": args.topic, "dl": partition.dl, "b": partition.b,
                "seed": args.seed,
                "params": {"max_groups": args.max_groups, "runs": args.runs,
                           "iters": args.iters},
                "runs": [
                    {"seed": r.seed, "sweeps": r.sweeps, "dl": r.dl,
                     "trajectory": r.trajectory} for r in runs
                ],
            },
            indent=2, sort_keys=True,
        ) + "\n",
        encoding="utf-8",
    )
    print(f"{args.topic}: B={partition.b} dl={partition.dl:.3f}")
    return 0


def cmd_groups_content(args):
    g = _load_graph_dir(args.graphs, args.topic)
    stances = {
        user: label
        for (user, _t), label in stance_store(args.stances).mapping().items()
    }
    grouping = content_groups(stances, g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "content.tsv").open("w", encoding="utf-8") as fh:
        for node in sorted(grouping.assignment):
            fh.write(f"{node}\t{grouping.assignment[node]}\n")
    print(f"{args.topic}: coverage {grouping.coverage:.3f} "
          f"({len(grouping.unlabeled)} unlabeled)")
    return 0


def cmd_groups_composition(args):
    assignment = {}
    with Path(args.partition).open(encoding="utf-8") as fh:
        for line in fh:
            node, block = line.rstrip("\n").split("\t")
            assignment[node] = int(block)
    stances = {}
    with Path(args.content).open(encoding="utf-8") as fh:
        for line in fh:
            node, stance = line.rstrip("\n").split("\t")
            stances[node] = stance
    partition = Partition(assignment, len(set(assignment.values())), 0.0)
    grouping = StanceGrouping(
        "", stances, len(stances) / len(assignment) if assignment else 0.0,
        set(assignment) - set(stances),
    )
    comp = group_composition(partition, grouping)
    payload = {
        "dominant_stance": comp.dominant_stance,
        "max_ds": comp.max_ds,
        "min_ds": comp.min_ds,
        "blocks": [
            {"block": b.block, "size": b.size, "histogram": b.histogram,
             "dominant_fraction": b.dominant_fraction}
            for b in comp.blocks
        ],
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


# --- run-dir based commands ---------------------------------------------------


def _config_for_run_dir(args) -> PipelineConfig:
    if args.config:
        return load_config(args.config)
    raise ConfigError("--config is required")


def cmd_metrics_report(args):
    config = _config_for_run_dir(args)
    run_root = Path(args.run_dir).parent if args.run_dir else None
    run_pipeline(config, stages=["metrics"], run_root=run_root)
    run_dir = run_dir_for(config, run_root)
    src = run_dir / "metrics" / (
        "stance_report.csv" if args.grouping == "stance" else "structural_report.csv"
    )
    lines = src.read_text(encoding="utf-8").splitlines()
    if args.topic != "all":
        lines = [lines[0]] + [l for l in lines[1:] if l.startswith(f"{args.topic},")]
    print("\n".join(lines))
    return 0


def cmd_crosstopic(args):
    config = _config_for_run_dir(args)
    if args.threshold is not None:
        config.metrics.hypergraph_threshold = args.threshold
    run_root = Path(args.run_dir).parent if args.run_dir else None
    run_pipeline(config, stages=["crosstopic"], run_root=run_root)
    run_dir = run_dir_for(config, run_root)
    name = {
        "overlap": "overlap.csv",
        "hypergraph": "hyperedges.json",
        "alignment": f"alignment_{args.grouping}.csv",
        "joint": None,
    }[args.what]
    cross = run_dir / "crosstopic"
    if name:
        print((cross / name).read_text(encoding="utf-8"))
    else:
        for path in sorted(cross.glob("joint_*.csv")):
            print(path.name)
            print(path.read_text(encoding="utf-8"))
    return 0


def cmd_run(args):
    config = load_config(args.config)
    stages = args.stages.split(",") if args.stages else None
    run_root = Path(args.out) if args.out else None
    manifests = run_pipeline(config, stages=stages, run_root=run_root)
    run_dir = run_dir_for(config, run_root)
    for m in manifests:
        status = "cached" if m.cached else f"{m.wall_time_s:.2f}s"
        print(f"{m.stage}: {status}")
    print(f"run directory: {run_dir}")
    return 0


def cmd_report(args):
    run_dir = Path(args.out)
    config_path = run_dir / "config.json"
    if args.config:
        config = load_config(args.config)
    elif config_path.exists():
        config = config_from_dict(json.loads(config_path.read_text(encoding="utf-8")))
    else:
        raise ConfigError(f"pass --config or keep config.json inside {run_dir}")
    stage_report(config, run_dir)
    print(f"report bundle written to {run_dir / 'report'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarnet",
        description="Polarization measurement over archived interaction-event streams",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="event parsing, stats, corpus rules")
    ingest_sub = p_ingest.add_subparsers(dest="what", required=True)
    p = ingest_sub.add_parser("stats")
    p.add_argument("--input", nargs="+", required=True, help="event dump glob(s)")
    p.add_argument("--out", required=True)
    p.add_argument("--window", help="e.g. 2024-12:2025-05")
    p.set_defaults(fn=cmd_ingest_stats)
    p = ingest_sub.add_parser("filter")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out", required=True, help="filtered posts jsonl")
    p.add_argument("--reposts-out", help="also write repost events jsonl")
    p.add_argument("--min-reposts", type=int, default=1)
    p.add_argument("--min-chars", type=int, default=5)
    p.add_argument("--lang", default="en")
    p.set_defaults(fn=cmd_ingest_filter)
    p = ingest_sub.add_parser("sample")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fraction", type=float, default=0.03)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stratify-by-day", action="store_true")
    p.set_defaults(fn=cmd_ingest_sample)

    p_annotate = sub.add_parser("annotate", help="theme/topic/stance labeling")
    annotate_sub = p_annotate.add_subparsers(dest="what", required=True)
    for what in ("themes", "topics", "stances"):
        p = annotate_sub.add_parser(what)
        p.add_argument("--input", required=True, help="posts jsonl")
        p.add_argument("--provider", default="mock", help="'mock' or endpoint URL")
        p.add_argument("--out", required=True)
        if what == "topics":
            p.add_argument("--themes", required=True, help="themes.jsonl")
        if what == "stances":
            p.add_argument("--topic-labels", required=True, help="topics.jsonl")
            p.add_argument("--reposts", help="repost events jsonl")
            p.add_argument("--topic", help="restrict to one topic id")
            p.add_argument("--k", type=int, default=10)
            p.add_argument("--seed", type=int, default=0)
        p.set_defaults(fn=cmd_annotate)

    p_graph = sub.add_parser("graph", help="network construction and stats")
    graph_sub = p_graph.add_subparsers(dest="what", required=True)
    p = graph_sub.add_parser("build")
    p.add_argument("--corpus", required=True, help="filtered posts jsonl")
    p.add_argument("--reposts", required=True, help="repost events jsonl")
    p.add_argument("--topic-labels", required=True, help="topics.jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--topics", default="all", help="'all' or comma-separated ids")
    p.add_argument("--tau", default="reposts", choices=["reposts"])
    p.add_argument("--window", help="e.g. 2024-12:2025-05")
    p.add_argument("--include-isolated", action="store_true")
    p.set_defaults(fn=cmd_graph_build)
    p = graph_sub.add_parser("stats")
    p.add_argument("--graphs", required=True)
    p.set_defaults(fn=cmd_graph_stats)

    p_groups = sub.add_parser("groups", help="structural and content group detection")
    groups_sub = p_groups.add_subparsers(dest="what", required=True)
    p = groups_sub.add_parser("structural")
    p.add_argument("--graphs", required=True)
    p.add_argument("--topic", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-groups", type=int, default=5)
    p.add_argument("--runs", type=int, default=15)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--collapse-multigraph", action="store_true")
    p.set_defaults(fn=cmd_groups_structural)
    p = groups_sub.add_parser("content")
    p.add_argument("--graphs", required=True)
    p.add_argument("--topic", required=True)
    p.add_argument("--stances", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_groups_content)
    p = groups_sub.add_parser("composition")
    p.add_argument("--partition", required=True, help="partition.tsv")
    p.add_argument("--content", required=True, help="content.tsv")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_groups_composition)

    p_metrics = sub.add_parser("metrics", help="per-network polarization scores")
    metrics_sub = p_metrics.add_subparsers(dest="what", required=True)
    p = metrics_sub.add_parser("report")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir")
    p.add_argument("--topic", default="all")
    p.add_argument("--grouping", choices=["stance", "structural"], default="stance")
    p.set_defaults(fn=cmd_metrics_report)

    p_cross = sub.add_parser("crosstopic", help="overlap, alignment, joint stances")
    cross_sub = p_cross.add_subparsers(dest="what", required=True)
    for what in ("overlap", "hypergraph", "alignment", "joint"):
        p = cross_sub.add_parser(what)
        p.add_argument("--config", required=True)
        p.add_argument("--run-dir")
        p.add_argument("--grouping", choices=["content", "structural"], default="content")
        p.add_argument("--threshold", type=float)
        p.set_defaults(fn=cmd_crosstopic)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--stages", help="comma-separated subset, e.g. metrics,crosstopic")
    p.add_argument("--out", help="override the output root from the config")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("report", help="render the report bundle for a run directory")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PolarnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
