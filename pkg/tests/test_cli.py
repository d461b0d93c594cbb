import json

import pytest

from conftest import FIXTURE_TOPICS
from polarnet.cli import main
from polarnet.config import config_from_dict
from polarnet.pipeline import run_dir_for


@pytest.fixture(scope="module")
def workspace(event_fixture, tmp_path_factory):
    """Event dump plus a config file pointing at it."""
    event_path, _ = event_fixture
    root = tmp_path_factory.mktemp("cli")
    config = {
        "inputs": [str(event_path)],
        "out_dir": str(root / "runs"),
        "seed": 42,
        "window": {"start": "2025-01-01", "end": "2025-04-01"},
        "topics": FIXTURE_TOPICS,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    return event_path, config_path, root, config


class TestIngestCommands:
    def test_stats(self, workspace, tmp_path, capsys):
        event_path, _, _, _ = workspace
        assert main(["ingest", "stats", "--input", str(event_path),
                     "--out", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "activity_stats.json").read_text())
        assert payload["per_type"]["post"]["total_actions"] > 0
        daily = (tmp_path / "activity_daily.csv").read_text().splitlines()
        assert daily[0] == "date,action_type,actions,distinct_authors"

    def test_filter_and_sample(self, workspace, tmp_path, capsys):
        event_path, _, _, _ = workspace
        filtered = tmp_path / "filtered.jsonl"
        reposts = tmp_path / "reposts.jsonl"
        assert main(["ingest", "filter", "--input", str(event_path),
                     "--out", str(filtered), "--reposts-out", str(reposts),
                     "--min-reposts", "1", "--min-chars", "5", "--lang", "en"]) == 0
        n_filtered = len(filtered.read_text().splitlines())
        assert n_filtered > 100
        sampled = tmp_path / "sampled.jsonl"
        assert main(["ingest", "sample", "--input", str(filtered),
                     "--out", str(sampled), "--fraction", "0.1", "--seed", "5"]) == 0
        assert len(sampled.read_text().splitlines()) == round(0.1 * n_filtered)


@pytest.fixture(scope="module")
def corpus_files(workspace, tmp_path_factory):
    event_path, _, _, _ = workspace
    tmp = tmp_path_factory.mktemp("corpus")
    filtered = tmp / "filtered.jsonl"
    reposts = tmp / "reposts.jsonl"
    main(["ingest", "filter", "--input", str(event_path),
          "--out", str(filtered), "--reposts-out", str(reposts)])
    labels = tmp / "labels"
    main(["annotate", "themes", "--input", str(filtered),
          "--provider", "mock", "--out", str(labels)])
    main(["annotate", "topics", "--input", str(filtered),
          "--themes", str(labels / "themes.jsonl"),
          "--provider", "mock", "--out", str(labels)])
    main(["annotate", "stances", "--input", str(filtered),
          "--topic-labels", str(labels / "topics.jsonl"),
          "--reposts", str(reposts),
          "--provider", "mock", "--out", str(labels), "--seed", "3"])
    graphs = tmp / "graphs"
    main(["graph", "build", "--corpus", str(filtered), "--reposts", str(reposts),
          "--topic-labels", str(labels / "topics.jsonl"), "--out", str(graphs),
          "--topics", "all", "--tau", "reposts", "--window", "2025-01:2025-03"])
    return tmp


class TestAnnotateAndGraphCommands:
    def test_labels_written(self, corpus_files):
        labels = corpus_files / "labels"
        assert (labels / "themes.jsonl").exists()
        assert (labels / "topics.jsonl").exists()
        assert (labels / "stances_russia_ukraine.jsonl").exists()
        record = json.loads(
            (labels / "stances_russia_ukraine.jsonl").read_text().splitlines()[0]
        )
        assert set(record) == {"user", "topic", "label", "template_hash", "timestamp"}

    def test_graph_files_written(self, corpus_files):
        topic_dir = corpus_files / "graphs" / "russia_ukraine" / "2025-01_2025-03"
        assert (topic_dir / "reposts.graph").exists()
        assert (topic_dir / "reposts.csv").exists()
        assert (topic_dir / "nodes.tsv").exists()

    def test_graph_stats_prints_rows(self, corpus_files, capsys):
        assert main(["graph", "stats", "--graphs", str(corpus_files / "graphs")]) == 0
        out = capsys.readouterr().out
        assert "russia_ukraine" in out
        assert out.splitlines()[0] == "topic,window,nodes,edges,average_degree"

    def test_groups_structural_and_content(self, corpus_files, tmp_path, capsys):
        out = tmp_path / "groups"
        assert main(["groups", "structural", "--graphs", str(corpus_files / "graphs"),
                     "--topic", "russia_ukraine", "--out", str(out),
                     "--max-groups", "5", "--runs", "5", "--iters", "20",
                     "--seed", "11"]) == 0
        meta = json.loads((out / "partition.json").read_text())
        assert meta["b"] >= 2
        assert main(["groups", "content", "--graphs", str(corpus_files / "graphs"),
                     "--topic", "russia_ukraine",
                     "--stances", str(corpus_files / "labels" / "stances_russia_ukraine.jsonl"),
                     "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["groups", "composition", "--partition", str(out / "partition.tsv"),
                     "--content", str(out / "content.tsv")]) == 0
        printed = capsys.readouterr().out
        payload = json.loads(printed[printed.index("{"):])
        assert "max_ds" in payload


class TestRunAndReport:
    def test_run_all_stages(self, workspace, capsys):
        _, config_path, root, raw = workspace
        assert main(["run", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        for stage in ("ingest", "annotate", "graph", "groups", "metrics",
                      "crosstopic", "report"):
            assert stage in out
        run_dir = run_dir_for(config_from_dict(raw))
        assert (run_dir / "report" / "report.txt").exists()

    def test_rerun_reports_cached(self, workspace, capsys):
        _, config_path, _, _ = workspace
        assert main(["run", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert out.count("cached") == 7

    def test_stage_subset(self, workspace, capsys):
        _, config_path, _, _ = workspace
        assert main(["run", "--config", str(config_path), "--stages", "metrics"]) == 0

    def test_report_command(self, workspace, capsys):
        _, config_path, _, raw = workspace
        run_dir = run_dir_for(config_from_dict(raw))
        assert main(["report", "--out", str(run_dir)]) == 0
        assert (run_dir / "report" / "summary.json").exists()

    def test_metrics_report_prints_table(self, workspace, capsys):
        _, config_path, _, _ = workspace
        assert main(["metrics", "report", "--config", str(config_path),
                     "--grouping", "structural"]) == 0
        out = capsys.readouterr().out
        assert "n_groups" in out

    def test_crosstopic_commands(self, workspace, capsys):
        _, config_path, _, _ = workspace
        for what in ("overlap", "hypergraph", "alignment", "joint"):
            assert main(["crosstopic", what, "--config", str(config_path),
                         "--grouping", "content", "--threshold", "0.2"]) == 0

    def test_config_error_exit_code(self, tmp_path, capsys):
        missing = tmp_path / "none.json"
        assert main(["run", "--config", str(missing)]) == 2

    def test_stage_failure_exit_code(self, workspace, tmp_path, capsys):
        _, config_path, _, raw = workspace
        fresh = dict(raw)
        fresh["out_dir"] = str(tmp_path / "fresh")
        config_path2 = tmp_path / "cfg.json"
        config_path2.write_text(json.dumps(fresh))
        assert main(["run", "--config", str(config_path2), "--stages", "metrics"]) == 3
        err = capsys.readouterr().err
        assert "graph" in err
