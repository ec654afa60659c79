import math

import numpy as np
import pytest

from hypernews.analysis import (
    case_study_stats,
    early_detection,
    export_embeddings,
    format_cutoff,
    read_embeddings,
    write_case_study,
    write_early_detection,
    write_metrics_table,
)
from hypernews.data import SyntheticConfig, generate_synthetic
from hypernews.errors import MissingLabels
from hypernews.hypergraph import Hypergraph
from hypernews.metrics import MetricsReport, compute_fold_metrics
from hypernews.training import Problem, TrainConfig, init_params


def brute_force_stats(hg, label):
    """Loop-only per-class statistics."""
    idx = [j for j in range(hg.edge_count) if hg.edge_labels[j] == label]
    users = sorted({int(u) for j in idx for u in hg.edges[j]})
    means = []
    for k in range(hg.attr_dim):
        total = 0.0
        for u in users:
            total += hg.node_attrs[u, k]
        means.append(total / len(users))
    links = set()
    for j in idx:
        members = [int(u) for u in hg.edges[j]]
        for a in members:
            for b in members:
                if a < b:
                    links.add((a, b))
    n = len(users)
    return {
        "mean_users": sum(len(hg.edges[j]) for j in idx) / len(idx),
        "attr_means": means,
        "distinct": n,
        "links": len(links),
        "density": len(links) / (n * (n - 1) / 2) if n > 1 else 0.0,
    }


class TestCaseStudy:
    def test_two_edge_example(self):
        hg = Hypergraph(node_count=6, edges=[[0, 1], [2, 3, 4, 5]], node_attrs=np.arange(12.0).reshape(6, 2),
                        edge_texts=["a", "b"], edge_labels=[0, 1])
        stats = case_study_stats(hg)
        assert (stats[0].mean_users_per_edge, stats[1].mean_users_per_edge) == (2.0, 4.0)
        assert stats[0].attr_means.tolist() == [1.0, 2.0]
        assert stats[1].projection_density == 1.0

    def test_brute_force_oracle(self):
        hg, _ = generate_synthetic(SyntheticConfig(m=150, t=40, seed=2))
        stats = case_study_stats(hg)
        for c in (0, 1):
            ref = brute_force_stats(hg, c)
            assert abs(stats[c].mean_users_per_edge - ref["mean_users"]) <= 1e-12
            assert np.max(np.abs(stats[c].attr_means - ref["attr_means"])) <= 1e-12
            assert stats[c].distinct_users == ref["distinct"]
            assert stats[c].projection_links == ref["links"]
            assert abs(stats[c].projection_density - ref["density"]) <= 1e-12

    def test_requires_labels(self):
        hg = Hypergraph(node_count=2, edges=[[0, 1]], node_attrs=np.zeros((2, 1)), edge_texts=["x"])
        with pytest.raises(MissingLabels):
            case_study_stats(hg)

    def test_csv(self, tmp_path):
        hg, _ = generate_synthetic(SyntheticConfig(m=60, t=12, seed=2, attr_dim=2))
        write_case_study(tmp_path / "cs.csv", case_study_stats(hg))
        rows = [line.split(",") for line in (tmp_path / "cs.csv").read_text().splitlines()]
        assert rows[0] == ["statistic", "real", "fake"]
        assert [r[0] for r in rows[1:]] == ["news_items", "mean_users_per_item", "attr0_mean", "attr1_mean",
                                            "distinct_users", "coparticipation_links", "coparticipation_density"]


class TestEarlyDetection:
    def test_structure_and_monotone_incidences(self, tmp_path):
        hg, _ = generate_synthetic(SyntheticConfig(m=200, t=60, seed=3))
        cuts = [3600.0, 4 * 3600.0, 24 * 3600.0, math.inf]
        res = early_detection(hg, TrainConfig(d=16, epochs=20), cuts)
        assert len(res.accuracy) == 4
        assert res.incidence_fraction == sorted(res.incidence_fraction)
        assert res.incidence_fraction[-1] == 1.0
        assert res.accuracy[-1] == res.full_accuracy
        assert res.mean_participants == sorted(res.mean_participants)
        write_early_detection(tmp_path, res)
        acc = (tmp_path / "early_accuracy.csv").read_text().splitlines()
        assert acc[0] == "cutoff,seconds,accuracy,full_accuracy" and acc[1].startswith("1h,")
        assert (tmp_path / "early_participants.csv").exists()

    def test_format_cutoff(self):
        assert [format_cutoff(s) for s in (7200, 90, 120, 86400, math.inf)] == ["2h", "90s", "2m", "1d", "all"]


class TestExport:
    def test_lines_roundtrip_and_bytes(self, tmp_path):
        hg, _ = generate_synthetic(SyntheticConfig(m=100, t=25, seed=4))
        pr = Problem(hg, TrainConfig(d=16))
        out = pr.forward(init_params(pr, 0))
        export_embeddings(tmp_path / "a.tsv", hg, out)
        export_embeddings(tmp_path / "b.tsv", hg, out)
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
        lines = (tmp_path / "a.tsv").read_text().splitlines()
        assert len(lines) == 25
        ids, labels, preds, M = read_embeddings(tmp_path / "a.tsv")
        assert ids == hg.edge_ids and np.array_equal(labels, hg.edge_labels)
        assert np.array_equal(preds, out.predictions)
        assert np.max(np.abs(M - out.fused.values)) <= 1e-9


def test_metrics_table(tmp_path):
    folds = [compute_fold_metrics([0, 1, 1], [0, 1, 0]), compute_fold_metrics([1, 1], [1, 1])]
    write_metrics_table(tmp_path / "m.csv", {"full": MetricsReport(folds), "sem_only": MetricsReport(folds[:1])})
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0].startswith("variant,accuracy,accuracy_std,precision")
    assert rows[0].endswith("fold1_accuracy,fold2_accuracy,tn,fp,fn,tp")
    assert len(rows) == 3
