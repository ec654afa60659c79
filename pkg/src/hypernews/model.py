"""Hypergraph autoencoder + text/user fusion classifier for news hyperedges.

Forward pass for one epoch:

1. user embeddings ``Z = S relu(S X T0) T1`` (two hypergraph convolutions,
   identity on the last layer; ``S`` depends on the learnable edge weights),
2. attribute reconstruction through a 3-layer MLP decoder,
3. per-edge mean of participant embeddings ``U``,
4. symmetric InfoNCE between text features ``Ze`` and ``U``,
5. 3-layer MLP on ``[Ze, U]`` producing two logits per edge.

``total = rec + ce + alpha * infonce``.
"""

from __future__ import annotations

import hashlib
import io
import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DataError, ShapeMismatch

MODES = ("sem_only", "cre_only", "concat_no_mi", "full")
CHECKPOINT_VERSION = 1


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class ModelParams:
    """Named learnable tensors.

    ``enc.theta0`` (d_u x d_h), ``enc.theta1`` (d_h x d), ``enc.edge_weight``
    (1 x t), decoder ``dec.W1..3``/``dec.b1..3`` (d -> d_h -> d_h -> d_u) and
    classifier ``cls.W1..3``/``cls.b1..3`` (2d -> d_h -> d_h -> 2).
    """

    def __init__(self, tensors: "OrderedDict[str, Tensor]"):
        self.tensors = tensors

    @classmethod
    def init(cls, attr_dim: int, hidden: int, dim: int, edge_count: int, rng: np.random.Generator):
        shapes = [
            ("enc.theta0", attr_dim, hidden),
            ("enc.theta1", hidden, dim),
            ("dec.W1", dim, hidden),
            ("dec.W2", hidden, hidden),
            ("dec.W3", hidden, attr_dim),
            ("cls.W1", 2 * dim, hidden),
            ("cls.W2", hidden, hidden),
            ("cls.W3", hidden, 2),
        ]
        t = OrderedDict()
        for name, fi, fo in shapes:
            t[name] = Tensor(glorot(rng, fi, fo), requires_grad=True, name=name)
            if name[4] == "W":
                bname = name.replace("W", "b")
                t[bname] = Tensor(np.zeros((1, fo)), requires_grad=True, name=bname)
        t["enc.edge_weight"] = Tensor(np.ones((1, edge_count)), requires_grad=True, name="enc.edge_weight")
        return cls(t)

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.values())

    def names(self):
        return list(self.tensors)

    @property
    def dims(self) -> dict:
        return {
            "attr_dim": self["enc.theta0"].shape[0],
            "hidden": self["enc.theta0"].shape[1],
            "dim": self["enc.theta1"].shape[1],
            "edge_count": self["enc.edge_weight"].shape[1],
        }

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.values.copy()) for k, v in self.tensors.items())

    def copy(self) -> "ModelParams":
        return ModelParams(OrderedDict((k, Tensor(v.values.copy(), True, k)) for k, v in self.tensors.items()))

    def clamp_edge_weights(self):
        w = self["enc.edge_weight"].values
        np.maximum(w, 0.0, out=w)

    def equal(self, other: "ModelParams") -> bool:
        return self.names() == other.names() and all(
            np.array_equal(a.values, b.values) for a, b in zip(self, other)
        )


@dataclass
class ForwardOutputs:
    Z: Optional[Tensor]
    X_hat: Optional[Tensor]
    U: Optional[Tensor]
    Ze: Tensor
    fused: Tensor
    logits: Tensor
    rec: Tensor
    mi: Tensor
    ce: Optional[Tensor]
    total: Tensor

    @property
    def predictions(self) -> np.ndarray:
        return predict(self.logits.values)

    def loss_values(self) -> dict:
        return {
            "l_rec": self.rec.item(),
            "l_mi": self.mi.item(),
            "l_d": self.ce.item() if self.ce is not None else float("nan"),
            "l_total": self.total.item(),
        }


def predict(logits: np.ndarray) -> np.ndarray:
    """Argmax over two logits; ties go to class 0 (real)."""
    logits = np.asarray(logits)
    return (logits[:, 1] > logits[:, 0]).astype(np.int64)


def encode_users(op, X: Tensor, params: ModelParams) -> Tensor:
    w = params["enc.edge_weight"]
    h = ad.relu(ad.matmul(ad.propagate(op, X, w), params["enc.theta0"]))
    return ad.propagate(op, ad.matmul(h, params["enc.theta1"]), w)


def _mlp3(x: Tensor, params: ModelParams, prefix: str) -> Tensor:
    h = ad.relu(ad.affine(x, params[f"{prefix}.W1"], params[f"{prefix}.b1"]))
    h = ad.relu(ad.affine(h, params[f"{prefix}.W2"], params[f"{prefix}.b2"]))
    return ad.affine(h, params[f"{prefix}.W3"], params[f"{prefix}.b3"])


def decode_users(Z: Tensor, params: ModelParams) -> Tensor:
    return _mlp3(Z, params, "dec")


def classify(Ze: Tensor, U: Tensor, params: ModelParams):
    if Ze.shape != U.shape:
        raise ShapeMismatch(f"text and user embeddings differ in shape: {Ze.shape} vs {U.shape}")
    fused = ad.concat_cols(Ze, U)
    logits = _mlp3(fused, params, "cls")
    return logits, predict(logits.values), fused


_ZERO = np.zeros((1, 1))


def forward(op, X, edges, Ze, params: ModelParams, alpha=0.5, tau=0.5, labels=None,
            train_idx=None, mode="full", freeze_users=False) -> ForwardOutputs:
    """One full-batch pass.

    ``op`` is the ``PropagationOperator`` of the hypergraph, ``edges`` the
    per-edge node lists used for pooling. Cross-entropy uses only
    ``labels[train_idx]``; reconstruction and InfoNCE use every node/edge.
    In ``cre_only`` mode ``freeze_users`` detaches ``U`` before the classifier
    so the autoencoder is trained without the detection objective.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    X = ad.as_tensor(X)
    Ze = ad.as_tensor(Ze)
    zero = Tensor(_ZERO)

    if mode == "sem_only":
        Z = X_hat = U = None
        rec = mi = zero
        U_cls = Tensor(np.zeros_like(Ze.values))
    else:
        Z = encode_users(op, X, params)
        X_hat = decode_users(Z, params)
        rec = ad.mse_loss(X, X_hat)
        U = ad.mean_pool_rows(Z, edges)
        U_cls = U.detach() if (mode == "cre_only" and freeze_users) else U
        if mode == "cre_only":
            mi = zero
        elif mode == "full" and alpha != 0:
            mi = ad.info_nce(Ze, U, tau)
        else:
            # reported only; kept off the graph
            mi = ad.info_nce(Ze, U.detach(), tau)

    Ze_cls = Tensor(np.zeros_like(Ze.values)) if mode == "cre_only" else Ze
    logits, _, fused = classify(Ze_cls, U_cls, params)

    ce = None
    if labels is not None and train_idx is not None and len(train_idx):
        ce = ad.softmax_cross_entropy(ad.take_rows(logits, train_idx), np.asarray(labels)[train_idx])

    terms = [(1.0, rec)]
    if ce is not None:
        terms.append((1.0, ce))
    if mode == "full" and alpha != 0:
        terms.append((alpha, mi))
    total = ad.weighted_sum(terms)
    return ForwardOutputs(Z, X_hat, U, Ze, fused, logits, rec, mi, ce, total)


# -- checkpoints -------------------------------------------------------------

def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def save_checkpoint(path, params: ModelParams, seed: int, config: dict):
    meta = {
        "format": "hypernews-checkpoint",
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "config_hash": config_hash(config),
        "names": params.names(),
    }
    payload = {f"param:{k}": v for k, v in params.arrays().items()}
    payload["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path):
    """Returns ``(params, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta.get("format") != "hypernews-checkpoint":
            raise DataError(f"{path}: not a checkpoint file")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        tensors = OrderedDict(
            (name, Tensor(data[f"param:{name}"], requires_grad=True, name=name)) for name in meta["names"]
        )
    return ModelParams(tensors), meta
