"""Dataset files, planted synthetic data and time-windowed views.

File formats (UTF-8, one record per line):

nodes    ``user_id<TAB>a1,a2,...,a_du``
edges    ``edge_id<TAB>label<TAB>text<TAB>user[@seconds](,user[@seconds])*``
         where label is ``0`` (real), ``1`` (fake) or ``?`` (unlabeled) and
         timestamps are all-or-none per file
manifest ``key=value`` lines with keys nodes, edges, embeddings (optional),
         d_u, m, t; relative paths resolve against the manifest directory
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    CountMismatch,
    DataError,
    EmptyHyperedge,
    IndexOutOfRange,
    InvalidConfig,
    MissingTimestamps,
    ParseError,
)
from .hypergraph import Hypergraph

SYNTH_SALT = 0x5EED_DA7A


# -- manifest ----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetManifest:
    nodes: Path
    edges: Path
    d_u: int
    m: int
    t: int
    embeddings: Optional[Path] = None

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"manifest not found: {path}")
        fields = {}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", path, lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in ("nodes", "edges", "embeddings", "d_u", "m", "t"):
                raise ParseError(f"unknown manifest key {key!r}", path, lineno)
            fields[key] = value
        missing = {"nodes", "edges", "d_u", "m", "t"} - fields.keys()
        if missing:
            raise ParseError(f"manifest lacks keys: {', '.join(sorted(missing))}", path)
        base = path.parent
        try:
            counts = {k: int(fields[k]) for k in ("d_u", "m", "t")}
        except ValueError as exc:
            raise ParseError(f"bad integer: {exc}", path) from None
        emb = fields.get("embeddings")
        return cls(
            nodes=base / fields["nodes"],
            edges=base / fields["edges"],
            embeddings=(base / emb) if emb else None,
            **counts,
        )

    def write(self, path):
        path = Path(path)
        base = path.parent.resolve()

        def rel(p):
            p = Path(p).resolve()
            try:
                return p.relative_to(base).as_posix()
            except ValueError:
                return str(p)

        lines = [f"nodes={rel(self.nodes)}", f"edges={rel(self.edges)}"]
        if self.embeddings is not None:
            lines.append(f"embeddings={rel(self.embeddings)}")
        lines += [f"d_u={self.d_u}", f"m={self.m}", f"t={self.t}"]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- attribute preprocessing -------------------------------------------------

def standardize_columns(X: np.ndarray) -> np.ndarray:
    """Zero mean / unit variance per column; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    centered = X - mean
    std = np.sqrt((centered ** 2).mean(axis=0))
    out = np.zeros_like(centered)
    ok = std > 0
    out[:, ok] = centered[:, ok] / std[ok]
    return out


# -- reading / writing -------------------------------------------------------

def _read_lines(path: Path):
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if line.strip():
                yield lineno, line


def _parse_floats(raw: str, path, lineno) -> list[float]:
    try:
        return [float(x) for x in raw.split(",")] if raw else []
    except ValueError as exc:
        raise ParseError(f"bad number: {exc}", path, lineno) from None


def load_dataset(manifest, standardize: bool = True) -> Hypergraph:
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.read(manifest)

    node_ids, rows, index = [], [], {}
    for lineno, line in _read_lines(manifest.nodes):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError("expected 'user_id<TAB>a1,...'", manifest.nodes, lineno)
        uid, raw = parts
        if uid in index:
            raise ParseError(f"duplicate user id {uid!r}", manifest.nodes, lineno)
        vals = _parse_floats(raw, manifest.nodes, lineno)
        if len(vals) != manifest.d_u:
            raise ParseError(f"expected {manifest.d_u} attributes, got {len(vals)}", manifest.nodes, lineno)
        index[uid] = len(node_ids)
        node_ids.append(uid)
        rows.append(vals)

    edge_ids, labels, texts, edges, times = [], [], [], [], []
    seen_edges = set()
    timed = None
    for lineno, line in _read_lines(manifest.edges):
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError("expected 'edge_id<TAB>label<TAB>text<TAB>users'", manifest.edges, lineno)
        eid, lab, text, users = parts
        if eid in seen_edges:
            raise ParseError(f"duplicate edge id {eid!r}", manifest.edges, lineno)
        seen_edges.add(eid)
        if lab not in ("0", "1", "?"):
            raise ParseError(f"label must be 0, 1 or ?, got {lab!r}", manifest.edges, lineno)
        members, stamps = [], []
        for item in (u for u in users.split(",") if u):
            uid, at, ts = item.partition("@")
            has_ts = bool(at)
            if timed is None:
                timed = has_ts
            elif timed != has_ts:
                raise ParseError("timestamps must be given for all incidences or none", manifest.edges, lineno)
            if uid not in index:
                raise IndexOutOfRange(f"edge {eid!r} references unknown user {uid!r}")
            members.append(index[uid])
            if has_ts:
                try:
                    stamps.append(float(ts))
                except ValueError:
                    raise ParseError(f"bad timestamp {ts!r}", manifest.edges, lineno) from None
        if not members:
            raise EmptyHyperedge(f"edge {eid!r} has no users")
        order = np.argsort(members, kind="stable")
        members = np.asarray(members, dtype=np.int64)[order]
        if np.any(np.diff(members) == 0):
            raise ParseError(f"edge {eid!r} lists a user twice", manifest.edges, lineno)
        edge_ids.append(eid)
        labels.append(-1 if lab == "?" else int(lab))
        texts.append(text)
        edges.append(members)
        if timed:
            times.append(np.asarray(stamps)[order])

    if len(node_ids) != manifest.m:
        raise CountMismatch(f"manifest declares m={manifest.m} users, parsed {len(node_ids)}")
    if len(edge_ids) != manifest.t:
        raise CountMismatch(f"manifest declares t={manifest.t} hyperedges, parsed {len(edge_ids)}")

    X = np.asarray(rows, dtype=np.float64).reshape(len(node_ids), manifest.d_u)
    if standardize:
        X = standardize_columns(X)
    hg = Hypergraph(
        node_count=len(node_ids),
        edges=edges,
        node_attrs=X,
        edge_texts=texts,
        edge_labels=np.asarray(labels, dtype=np.int64),
        incidence_times=times if timed else None,
        node_ids=node_ids,
        edge_ids=edge_ids,
    )
    iso = hg.isolated_nodes()
    if iso.size:
        warnings.warn(f"{iso.size} users take part in no news item: "
                      + ", ".join(node_ids[i] for i in iso[:10]), stacklevel=2)
    return hg


def _clean_text(text: str) -> str:
    return " ".join(text.replace("\t", " ").splitlines())


def write_dataset(hg: Hypergraph, directory, embeddings: Optional[np.ndarray] = None) -> Path:
    """Write ``nodes.tsv``, ``edges.tsv`` (and ``embeddings.tsv``) plus ``manifest.txt``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nodes_path = directory / "nodes.tsv"
    edges_path = directory / "edges.tsv"
    with nodes_path.open("w", encoding="utf-8", newline="\n") as fh:
        for uid, row in zip(hg.node_ids, hg.node_attrs):
            fh.write(f"{uid}\t{','.join(repr(float(v)) for v in row)}\n")
    labels = hg.edge_labels if hg.edge_labels is not None else np.full(hg.edge_count, -1)
    with edges_path.open("w", encoding="utf-8", newline="\n") as fh:
        for j, eid in enumerate(hg.edge_ids):
            lab = "?" if labels[j] < 0 else str(int(labels[j]))
            if hg.incidence_times is not None:
                users = ",".join(f"{hg.node_ids[i]}@{float(ts)!r}" for i, ts in zip(hg.edges[j], hg.incidence_times[j]))
            else:
                users = ",".join(hg.node_ids[i] for i in hg.edges[j])
            fh.write(f"{eid}\t{lab}\t{_clean_text(hg.edge_texts[j])}\t{users}\n")
    emb_path = None
    if embeddings is not None:
        emb_path = directory / "embeddings.tsv"
        with emb_path.open("w", encoding="utf-8", newline="\n") as fh:
            for eid, vec in zip(hg.edge_ids, embeddings):
                fh.write(f"{eid}\t{','.join(repr(float(v)) for v in vec)}\n")
    manifest = DatasetManifest(nodes_path, edges_path, hg.attr_dim, hg.node_count, hg.edge_count, emb_path)
    manifest_path = directory / "manifest.txt"
    manifest.write(manifest_path)
    return manifest_path


# -- planted synthetic data --------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings.

    Attribute schema: ``attr_dim`` real columns; credible and uncredible users
    are Gaussians whose means sit ``attr_gap`` apart along a fixed +-1
    direction, with isotropic spread ``attr_scale``.

    With ``alignment="edge"`` a news item draws its whole participant set
    from the label-aligned pool (uncredible users for fake news) with
    probability ``p_align`` and from the opposite pool otherwise. With
    ``alignment="user"`` that choice is made per participant. Within a pool,
    users are drawn without replacement by a log-normal activity weight. The uncredible pool is smaller, so its members take part
    in more items. Fake items are larger by ``activity_skew``.

    Texts have ``1 + Poisson(text_length - 1)`` tokens. Each token comes from
    the shared vocabulary with probability ``vocab_overlap`` and from the
    class vocabulary otherwise. The short default texts leave some items
    with no class word, so text and participants complement each other.
    """

    m: int = 2000
    t: int = 400
    fraction_fake: float = 0.5
    fraction_uncredible: float = 0.4
    attr_dim: int = 8
    attr_gap: float = 2.0
    attr_scale: float = 1.0
    vocab_overlap: float = 0.3
    vocab_size: int = 5
    text_length: float = 4.0
    mean_users: float = 45.0
    activity_skew: float = 0.07
    activity_sigma: float = 0.5
    p_align: float = 0.85
    alignment: str = "edge"
    arrival_scale: float = 3600.0
    seed: int = 42

    def __post_init__(self):
        if not 0 < self.fraction_fake < 1:
            raise InvalidConfig("fraction_fake must lie in (0, 1)")
        if not 0 < self.fraction_uncredible < 1:
            raise InvalidConfig("fraction_uncredible must lie in (0, 1)")
        if not 0.5 <= self.p_align <= 1:
            raise InvalidConfig("p_align must lie in [0.5, 1]")
        if self.alignment not in ("edge", "user"):
            raise InvalidConfig("alignment must be 'edge' or 'user'")
        if not 0 <= self.vocab_overlap <= 1:
            raise InvalidConfig("vocab_overlap must lie in [0, 1]")
        if self.m < 2 or self.t < 2:
            raise InvalidConfig("need at least 2 users and 2 news items")
        if self.attr_dim < 1 or self.vocab_size < 1:
            raise InvalidConfig("attr_dim and vocab_size must be positive")
        if self.mean_users < 1 or self.text_length < 1:
            raise InvalidConfig("mean_users and text_length must be >= 1")
        if self.attr_scale < 0 or self.arrival_scale <= 0 or self.activity_sigma < 0:
            raise InvalidConfig("scales must be non-negative (arrival_scale positive)")
        n_unc = round(self.fraction_uncredible * self.m)
        if n_unc < 1 or n_unc >= self.m:
            raise InvalidConfig("both user pools must be non-empty")

    def as_dict(self) -> dict:
        return asdict(self)


def generate_synthetic(config: SyntheticConfig = SyntheticConfig()):
    """Returns ``(hypergraph, credible)`` with ``credible[i]`` the ground truth for user ``i``."""
    rng = np.random.default_rng(config.seed ^ SYNTH_SALT)
    m, t = config.m, config.t

    n_unc = round(config.fraction_uncredible * m)
    credible = np.ones(m, dtype=bool)
    credible[rng.permutation(m)[:n_unc]] = False

    direction = np.where(np.arange(config.attr_dim) % 2 == 0, 1.0, -1.0) / math.sqrt(config.attr_dim)
    half = 0.5 * config.attr_gap * direction
    X = config.attr_scale * rng.standard_normal((m, config.attr_dim))
    X += np.where(credible[:, None], half, -half)

    activity = rng.lognormal(0.0, config.activity_sigma, size=m)
    pools = {True: np.flatnonzero(credible), False: np.flatnonzero(~credible)}

    n_fake = round(config.fraction_fake * t)
    labels = np.zeros(t, dtype=np.int64)
    labels[rng.permutation(t)[:n_fake]] = 1

    shared = [f"common{k:03d}" for k in range(config.vocab_size)]
    vocab = {
        0: [f"real{k:03d}" for k in range(config.vocab_size)],
        1: [f"fake{k:03d}" for k in range(config.vocab_size)],
    }

    edges, texts, times = [], [], []
    for j in range(t):
        fake = labels[j] == 1
        # fake news aligns with the uncredible pool
        aligned_pool, other_pool = (pools[False], pools[True]) if fake else (pools[True], pools[False])
        scale = 1.0 + config.activity_skew / 2 if fake else 1.0 - config.activity_skew / 2
        size = max(1, int(rng.poisson(config.mean_users * scale)))
        if config.alignment == "edge":
            n_aligned = size if rng.random() < config.p_align else 0
        else:
            n_aligned = int(rng.binomial(size, config.p_align))
        n_aligned = min(n_aligned, aligned_pool.size)
        n_other = min(size - n_aligned, other_pool.size)
        members = np.concatenate([
            _draw(rng, aligned_pool, activity, n_aligned),
            _draw(rng, other_pool, activity, n_other),
        ])
        if members.size == 0:
            members = _draw(rng, aligned_pool, activity, 1)
        size = members.size
        members = members[rng.permutation(size)]
        arrivals = np.concatenate([[0.0], np.cumsum(rng.exponential(config.arrival_scale, size - 1))])
        order = np.argsort(members)
        edges.append(members[order])
        times.append(arrivals[order])

        length = 1 + rng.poisson(config.text_length - 1)
        from_shared = rng.random(length) < config.vocab_overlap
        idx = rng.integers(0, config.vocab_size, size=length)
        words = [shared[k] if s else vocab[int(labels[j])][k] for s, k in zip(from_shared, idx)]
        texts.append(" ".join(words))

    hg = Hypergraph(
        node_count=m,
        edges=edges,
        node_attrs=X,
        edge_texts=texts,
        edge_labels=labels,
        incidence_times=times,
        node_ids=[f"u{i:05d}" for i in range(m)],
        edge_ids=[f"n{j:05d}" for j in range(t)],
    )
    return hg, credible


def _draw(rng, pool, activity, k):
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    p = activity[pool] / activity[pool].sum()
    return rng.choice(pool, size=k, replace=False, p=p)


# -- early detection ---------------------------------------------------------

def time_window(hg: Hypergraph, cutoff_seconds: float) -> Hypergraph:
    """Keep incidences with timestamp <= cutoff.

    An item with no participant inside the window keeps its earliest
    participant(s), so every hyperedge stays non-empty.
    """
    if hg.incidence_times is None:
        raise MissingTimestamps("time windowing needs per-incidence timestamps")
    if not cutoff_seconds >= 0:
        raise ValueError("cutoff must be >= 0")
    edges, times = [], []
    for nodes, ts in zip(hg.edges, hg.incidence_times):
        keep = ts <= cutoff_seconds
        if not keep.any():
            keep = ts == ts.min()
        edges.append(nodes[keep])
        times.append(ts[keep])
    return hg.replace(edges=edges, incidence_times=times)


def parse_cutoff(token: str) -> float:
    """``'90s'``, ``'15m'``, ``'2h'``, ``'3d'`` (or a bare integer of seconds) to seconds."""
    token = token.strip().lower()
    units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
    if token in ("inf", "all"):
        return math.inf
    if token and token[-1] in units:
        number, unit = token[:-1], units[token[-1]]
    else:
        number, unit = token, 1
    if not number.isdigit():
        raise InvalidConfig(f"bad cutoff {token!r}; use an integer with suffix s/m/h/d")
    return float(int(number) * unit)
