"""Full-batch training loop, stratified splits and k-fold cross-validation."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .errors import InvalidConfig, MissingLabels, NonFiniteLoss, NonFiniteValue, TooFewEdges
from .hypergraph import Hypergraph, PropagationOperator
from .metrics import MetricsReport, compute_fold_metrics
from .model import MODES, ModelParams, forward
from .textembed import EmbedderConfig, edge_features

log = logging.getLogger(__name__)

# per-purpose sub-seed salts (seed ^ salt)
SPLIT_SALT = 0x51_17
FOLD_SALT = 0xF0_1D
INIT_SALT = 0x1_417


@dataclass(frozen=True)
class TrainConfig:
    d: int = 768
    d_h: Optional[int] = None
    epochs: int = 600
    lr: float = 0.001
    alpha: float = 0.5
    tau: float = 0.5
    ratios: tuple = (0.7, 0.1, 0.2)
    folds: int = 5
    seed: int = 0
    embedder: Optional[EmbedderConfig] = None
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.folds < 2:
            raise InvalidConfig("folds must be >= 2")
        if not self.lr > 0:
            raise InvalidConfig("lr must be positive")
        if not self.tau > 0:
            raise InvalidConfig("tau must be positive")
        if self.alpha < 0:
            raise InvalidConfig("alpha must be non-negative")
        if self.d < 8:
            raise InvalidConfig("embedding size d must be >= 8")
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be positive")
        ratios = tuple(float(r) for r in self.ratios)
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise InvalidConfig("split ratios must be three non-negative numbers summing to 1")
        object.__setattr__(self, "ratios", ratios)
        if self.d_h is None:
            object.__setattr__(self, "d_h", self.d)
        elif self.d_h < 1:
            raise InvalidConfig("d_h must be positive")
        emb = self.embedder or EmbedderConfig(dimension=self.d)
        if emb.dimension != self.d:
            emb = replace(emb, dimension=self.d)
        object.__setattr__(self, "embedder", emb)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["ratios"] = list(self.ratios)
        return out


@dataclass
class RunHistory:
    l_rec: list = field(default_factory=list)
    l_mi: list = field(default_factory=list)
    l_d: list = field(default_factory=list)
    l_total: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    COLUMNS = ("l_rec", "l_mi", "l_d", "l_total", "val_acc")

    def __len__(self):
        return len(self.l_total)

    def record(self, losses: dict, val_acc: float, seconds: float):
        for k in ("l_rec", "l_mi", "l_d", "l_total"):
            getattr(self, k).append(losses[k])
        self.val_acc.append(val_acc)
        self.seconds.append(seconds)

    def rows(self):
        for i in range(len(self)):
            yield [i + 1] + [getattr(self, c)[i] for c in self.COLUMNS]

    def write(self, path, timing_path=None):
        """Deterministic columns to ``path``; wall-clock seconds to ``timing_path``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch",) + self.COLUMNS)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        if timing_path is not None:
            with open(timing_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("epoch", "seconds"))
                for i, s in enumerate(self.seconds, 1):
                    w.writerow([i, f"{s:.6f}"])

    def same_as(self, other: "RunHistory") -> bool:
        return all(getattr(self, c) == getattr(other, c) for c in self.COLUMNS)


# -- splitting ---------------------------------------------------------------

def largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    raw = [r * n for r in ratios]
    sizes = [int(np.floor(x)) for x in raw]
    rest = n - sum(sizes)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[:rest]:
        sizes[i] += 1
    return sizes


def stratified_order(indices: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Interleave classes so every prefix is close to the class proportions."""
    indices = np.asarray(indices, dtype=np.int64)
    keyed = []
    for c in np.unique(labels[indices]):
        members = rng.permutation(indices[labels[indices] == c])
        n = members.size
        keyed.extend(((r + 0.5) / n, int(c), int(i)) for r, i in enumerate(members))
    keyed.sort()
    return np.array([i for _, _, i in keyed], dtype=np.int64)


def _labeled(labels: np.ndarray) -> np.ndarray:
    return np.flatnonzero(labels >= 0)


def split_edges(labels, ratios=(0.7, 0.1, 0.2), seed=0, indices=None):
    """Stratified (train, val, test) index arrays, deterministic per seed."""
    labels = np.asarray(labels, dtype=np.int64)
    idx = _labeled(labels) if indices is None else np.asarray(indices, dtype=np.int64)
    rng = np.random.default_rng(seed ^ SPLIT_SALT)
    order = stratified_order(idx, labels, rng)
    sizes = largest_remainder(order.size, ratios)
    if any(s == 0 for s in sizes):
        raise TooFewEdges(f"{order.size} labeled edges give split sizes {sizes}; every split needs >= 1")
    a, b = sizes[0], sizes[0] + sizes[1]
    return np.sort(order[:a]), np.sort(order[a:b]), np.sort(order[b:])


def fold_assignments(labels, folds: int, seed: int) -> list[np.ndarray]:
    labels = np.asarray(labels, dtype=np.int64)
    idx = _labeled(labels)
    if idx.size < folds:
        raise TooFewEdges(f"{idx.size} labeled edges cannot fill {folds} folds")
    order = stratified_order(idx, labels, np.random.default_rng(seed ^ FOLD_SALT))
    return [np.sort(order[f::folds]) for f in range(folds)]


# -- training ----------------------------------------------------------------

class Problem:
    """Per-dataset inputs shared by every epoch: operator, attributes, text features."""

    def __init__(self, hg: Hypergraph, config: TrainConfig, text_features: Optional[np.ndarray] = None):
        if not hg.has_labels:
            raise MissingLabels("training needs labeled hyperedges")
        self.hg = hg
        self.config = config
        self.op = PropagationOperator(hg.edges, hg.node_count, epsilon=config.epsilon)
        self.X = ad.Tensor(hg.node_attrs)
        Ze = edge_features(hg, config.embedder) if text_features is None else np.asarray(text_features, float)
        self.Ze = ad.Tensor(Ze)
        self.labels = hg.edge_labels

    def with_hypergraph(self, hg: Hypergraph) -> "Problem":
        """Same text features and labels on a restructured hypergraph."""
        clone = object.__new__(Problem)
        clone.__dict__.update(self.__dict__)
        clone.hg = hg
        clone.op = PropagationOperator(hg.edges, hg.node_count, epsilon=self.config.epsilon)
        return clone

    def forward(self, params, train_idx=None, labels=None, mode="full", freeze_users=False):
        return forward(
            self.op, self.X, self.hg.edges, self.Ze, params,
            alpha=self.config.alpha, tau=self.config.tau,
            labels=self.labels if labels is None else labels,
            train_idx=train_idx, mode=mode, freeze_users=freeze_users,
        )


def init_params(problem: Problem, seed: int) -> ModelParams:
    cfg = problem.config
    rng = np.random.default_rng(seed ^ INIT_SALT)
    return ModelParams.init(problem.hg.attr_dim, cfg.d_h, cfg.d, problem.hg.edge_count, rng)


def fit(problem: Problem, train_idx, val_idx=None, seed=None, mode="full", freeze_users=False,
        labels=None, progress=False):
    """Train for ``config.epochs`` full-batch epochs; returns ``(params, history)``."""
    if mode not in MODES:
        raise InvalidConfig(f"unknown mode {mode!r}")
    cfg = problem.config
    seed = cfg.seed if seed is None else seed
    labels = problem.labels if labels is None else np.asarray(labels)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise TooFewEdges("empty training set")
    val_idx = None if val_idx is None else np.asarray(val_idx, dtype=np.int64)
    params = init_params(problem, seed)
    opt = ad.Adam(list(params), lr=cfg.lr)
    history = RunHistory()
    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        opt.zero_grad()
        try:
            # overflow surfaces as NonFiniteValue; numpy's warning is redundant
            with np.errstate(over="ignore", invalid="ignore"):
                out = problem.forward(params, train_idx, labels, mode, freeze_users)
                out.total.backward()
        except NonFiniteValue as exc:
            raise NonFiniteLoss(epoch, str(exc)) from None
        opt.step()
        params.clamp_edge_weights()
        val_acc = float("nan")
        if val_idx is not None and val_idx.size:
            val_acc = float(np.mean(out.predictions[val_idx] == labels[val_idx]))
        losses = out.loss_values()
        if not all(np.isfinite(v) for v in losses.values()):
            raise NonFiniteLoss(epoch)
        history.record(losses, val_acc, time.perf_counter() - start)
        if progress and (epoch % 100 == 0 or epoch == 1):
            log.info("epoch %d total %.4f val_acc %.3f", epoch, losses["l_total"], val_acc)
    return params, history


def evaluate(problem: Problem, params: ModelParams, idx, mode="full"):
    """Predictions and metrics on ``idx`` with no parameter update."""
    out = problem.forward(params, None, None, mode)
    idx = np.asarray(idx, dtype=np.int64)
    preds = out.predictions
    return preds, compute_fold_metrics(preds[idx], problem.labels[idx]), out


def train(hg: Hypergraph, config: TrainConfig, mode="full", freeze_users=False, text_features=None):
    """Split 70/10/20 (by default), train on the first part.

    Returns ``(params, history, split)`` where ``split`` is ``(train, val, test)``.
    """
    problem = Problem(hg, config, text_features)
    split = split_edges(problem.labels, config.ratios, config.seed)
    params, history = fit(problem, split[0], split[1], config.seed, mode, freeze_users)
    return params, history, split


def _inner_ratios(config: TrainConfig):
    tr, va, _ = config.ratios
    return (tr / (tr + va), va / (tr + va), 0.0)


def _run_fold(args):
    hg, config, fold, folds, mode, freeze_users, text_features = args
    problem = Problem(hg, config, text_features)
    test = folds[fold]
    rest = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != fold]))
    train_idx, val_idx = _split_two(problem.labels, rest, _inner_ratios(config), config.seed + fold)
    params, history = fit(problem, train_idx, val_idx, config.seed + fold, mode, freeze_users)
    _, metrics, _ = evaluate(problem, params, test, mode)
    return metrics, history


def _split_two(labels, rest, inner, seed):
    """Stratified train/validation split of the non-test edges of a fold."""
    order = stratified_order(rest, labels, np.random.default_rng(seed ^ SPLIT_SALT))
    n_train = largest_remainder(order.size, inner)[0]
    if n_train == 0:
        raise TooFewEdges("fold leaves no training edges")
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def kfold_cv(hg: Hypergraph, config: TrainConfig, mode="full", freeze_users=False,
             text_features=None, jobs=1, return_histories=False):
    """Stratified k-fold CV; each fold trains on the rest (with an inner validation split)."""
    labels = hg.edge_labels
    if labels is None or not hg.has_labels:
        raise MissingLabels("cross-validation needs labeled hyperedges")
    folds = fold_assignments(labels, config.folds, config.seed)
    if text_features is None:
        text_features = edge_features(hg, config.embedder)
    tasks = [(hg, config, f, folds, mode, freeze_users, text_features) for f in range(config.folds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, tasks))
    else:
        results = [_run_fold(t) for t in tasks]
    report = MetricsReport([r[0] for r in results])
    if return_histories:
        return report, [r[1] for r in results]
    return report


def write_config_snapshot(path, config: TrainConfig, extra: Optional[dict] = None):
    payload = {"train": config.as_dict()}
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
