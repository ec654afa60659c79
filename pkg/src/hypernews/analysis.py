"""Ablations, per-class case-study statistics, early detection and embedding export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import MissingLabels
from .hypergraph import Hypergraph, projection_density
from .metrics import METRIC_NAMES, MetricsReport
from .model import MODES
from .data import time_window
from .training import Problem, TrainConfig, evaluate, fit, kfold_cv, split_edges

ABLATION_LABELS = {
    "sem_only": "text only",
    "cre_only": "users only",
    "concat_no_mi": "concat, no MI",
    "full": "full",
}


def run_ablation(hg: Hypergraph, config: TrainConfig, mode: str, freeze_users=False,
                 text_features=None, jobs=1) -> MetricsReport:
    """K-fold CV of one model variant.

    ``sem_only`` zeroes the user half of the classifier input and trains on
    cross-entropy alone; ``cre_only`` zeroes the text half (no MI term);
    ``concat_no_mi`` is the full model with ``alpha = 0``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown ablation mode {mode!r}; choose from {', '.join(MODES)}")
    return kfold_cv(hg, config, mode=mode, freeze_users=freeze_users, text_features=text_features, jobs=jobs)


def write_metrics_table(path, reports: dict):
    """One row per variant: mean and sample std of each metric, then per-fold accuracy."""
    n_folds = max(len(r.folds) for r in reports.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["variant"]
        for name in METRIC_NAMES:
            header += [name, f"{name}_std"]
        header += [f"fold{i + 1}_accuracy" for i in range(n_folds)]
        header += ["tn", "fp", "fn", "tp"]
        w.writerow(header)
        for label, rep in reports.items():
            row = [label]
            for name in METRIC_NAMES:
                row += [repr(rep.mean(name)), repr(rep.std(name))]
            accs = list(rep.values("accuracy"))
            row += [repr(float(a)) for a in accs] + [""] * (n_folds - len(accs))
            row += list(rep.confusion)
            w.writerow(row)


def format_metrics_table(reports: dict) -> str:
    head = f"{'variant':<14}" + "  ".join(f"{n:>15}" for n in METRIC_NAMES)
    return "\n".join([head] + [rep.format_row(label) for label, rep in reports.items()])


# -- case study --------------------------------------------------------------

@dataclass
class ClassStats:
    label: int
    edges: int
    mean_users_per_edge: float
    attr_means: np.ndarray
    distinct_users: int
    projection_links: int
    projection_density: float


def case_study_stats(hg: Hypergraph, attrs: Optional[np.ndarray] = None) -> dict:
    """Per-class participation statistics keyed by label (0 real, 1 fake).

    Attribute means are taken over the distinct users involved in the class.
    ``attrs`` overrides ``hg.node_attrs`` (e.g. raw, unstandardized values).
    """
    if not hg.has_labels:
        raise MissingLabels("case study statistics need labeled hyperedges")
    X = hg.node_attrs if attrs is None else np.asarray(attrs, dtype=np.float64)
    out = {}
    for c in (0, 1):
        edges = [e for e, y in zip(hg.edges, hg.edge_labels) if y == c]
        if not edges:
            continue
        users = np.unique(np.concatenate(edges))
        n, links, density = projection_density(edges)
        out[c] = ClassStats(
            label=c,
            edges=len(edges),
            mean_users_per_edge=float(np.mean([len(e) for e in edges])),
            attr_means=X[users].mean(axis=0),
            distinct_users=int(n),
            projection_links=int(links),
            projection_density=float(density),
        )
    return out


def write_case_study(path, stats: dict):
    attr_dim = len(next(iter(stats.values())).attr_means)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "real", "fake"])
        real, fake = stats.get(0), stats.get(1)

        def cell(s, attr, fmt=repr):
            return "" if s is None else fmt(getattr(s, attr))

        w.writerow(["news_items", cell(real, "edges", str), cell(fake, "edges", str)])
        w.writerow(["mean_users_per_item", cell(real, "mean_users_per_edge"), cell(fake, "mean_users_per_edge")])
        for k in range(attr_dim):
            w.writerow([f"attr{k}_mean",
                        "" if real is None else repr(float(real.attr_means[k])),
                        "" if fake is None else repr(float(fake.attr_means[k]))])
        w.writerow(["distinct_users", cell(real, "distinct_users", str), cell(fake, "distinct_users", str)])
        w.writerow(["coparticipation_links", cell(real, "projection_links", str), cell(fake, "projection_links", str)])
        w.writerow(["coparticipation_density", cell(real, "projection_density"), cell(fake, "projection_density")])


# -- early detection ---------------------------------------------------------

@dataclass
class EarlyDetectionResult:
    cutoffs: list
    accuracy: list
    full_accuracy: float
    mean_participants: list  # per cutoff, over test items
    incidence_fraction: list  # kept incidences / all incidences
    participants_by_class: list  # per cutoff, (real, fake) mean participants


def early_detection(hg: Hypergraph, config: TrainConfig, cutoffs: Sequence[float],
                    text_features=None, mode="full") -> EarlyDetectionResult:
    """Train once on the full hypergraph, then score the test items on time-truncated copies."""
    problem = Problem(hg, config, text_features)
    train_idx, val_idx, test_idx = split_edges(problem.labels, config.ratios, config.seed)
    params, _ = fit(problem, train_idx, val_idx, config.seed, mode)
    _, full_metrics, _ = evaluate(problem, params, test_idx, mode)
    total = sum(len(e) for e in hg.edges)
    labels = problem.labels
    accs, parts, fracs, by_class = [], [], [], []
    for cut in cutoffs:
        windowed = hg if math.isinf(cut) else time_window(hg, cut)
        _, metrics, _ = evaluate(problem.with_hypergraph(windowed), params, test_idx, mode)
        sizes = np.array([len(windowed.edges[j]) for j in test_idx], dtype=np.float64)
        accs.append(metrics.accuracy)
        parts.append(float(sizes.mean()))
        fracs.append(sum(len(e) for e in windowed.edges) / total)
        y = labels[test_idx]
        by_class.append(tuple(float(sizes[y == c].mean()) if np.any(y == c) else float("nan") for c in (0, 1)))
    return EarlyDetectionResult(list(cutoffs), accs, full_metrics.accuracy, parts, fracs, by_class)


def format_cutoff(seconds: float) -> str:
    if math.isinf(seconds):
        return "all"
    for unit, size in (("d", 86400), ("h", 3600), ("m", 60)):
        if seconds >= size and seconds % size == 0:
            return f"{int(seconds // size)}{unit}"
    return f"{int(seconds)}s"


def write_early_detection(directory, result: EarlyDetectionResult):
    directory = Path(directory)
    with open(directory / "early_accuracy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cutoff", "seconds", "accuracy", "full_accuracy"])
        for cut, acc in zip(result.cutoffs, result.accuracy):
            w.writerow([format_cutoff(cut), repr(float(cut)), repr(acc), repr(result.full_accuracy)])
    with open(directory / "early_participants.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cutoff", "seconds", "mean_participants", "mean_participants_real",
                    "mean_participants_fake", "incidence_fraction"])
        for cut, p, (r, f), frac in zip(result.cutoffs, result.mean_participants,
                                        result.participants_by_class, result.incidence_fraction):
            w.writerow([format_cutoff(cut), repr(float(cut)), repr(p), repr(r), repr(f), repr(frac)])


# -- embedding export --------------------------------------------------------

def export_embeddings(path, hg: Hypergraph, outputs, predictions=None):
    """``edge_id<TAB>label<TAB>prediction<TAB>v1,...`` for every hyperedge (fused embedding)."""
    fused = outputs.fused.values
    preds = outputs.predictions if predictions is None else predictions
    labels = hg.edge_labels if hg.edge_labels is not None else np.full(hg.edge_count, -1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for j, eid in enumerate(hg.edge_ids):
            lab = "?" if labels[j] < 0 else str(int(labels[j]))
            vals = ",".join(repr(float(v)) for v in fused[j])
            fh.write(f"{eid}\t{lab}\t{int(preds[j])}\t{vals}\n")


def read_embeddings(path):
    """Parse an export back into ``(ids, labels, predictions, matrix)``."""
    ids, labels, preds, rows = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            eid, lab, pred, vals = line.rstrip("\n").split("\t")
            ids.append(eid)
            labels.append(-1 if lab == "?" else int(lab))
            preds.append(int(pred))
            rows.append([float(v) for v in vals.split(",")])
    return ids, np.array(labels), np.array(preds), np.array(rows)
