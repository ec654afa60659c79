"""Command-line entry point: ``hypernews <command> [options]``.

Configuration files are ``key=value`` lines with dotted keys, e.g.::

    dataset = data/manifest.txt
    out = runs/demo
    train.d = 64
    train.epochs = 600
    embed.ngram_max = 2
    synth.p_align = 0.85

Exit codes: 1 configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import csv
import functools
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import analysis, plotting
from .data import DatasetManifest, SyntheticConfig, generate_synthetic, load_dataset, parse_cutoff, write_dataset
from .errors import ConfigError, DataError, InvalidConfig, NumericError
from .model import MODES, load_checkpoint, save_checkpoint
from .textembed import EmbedderConfig, edge_features
from .training import Problem, TrainConfig, evaluate, fit, kfold_cv, split_edges, write_config_snapshot

log = logging.getLogger("hypernews")

DEFAULT_CUTOFFS = "2h,4h,8h,16h,24h,36h,48h,72h"


# -- configuration file ------------------------------------------------------

def _field_types(cls):
    return {f.name: f for f in fields(cls)}


_SECTIONS = {
    "train": {k: v for k, v in _field_types(TrainConfig).items() if k != "embedder"},
    "embed": {k: v for k, v in _field_types(EmbedderConfig).items() if k != "dimension"},
    "synth": _field_types(SyntheticConfig),
}
_TOP_LEVEL = ("dataset", "out")


def _coerce(section, key, raw: str):
    if section == "train" and key == "ratios":
        return tuple(float(x) for x in raw.split(","))
    default = _SECTIONS[section][key].default
    if section == "train" and key == "d_h":
        return None if raw.lower() in ("", "none") else int(raw)
    if section == "embed" and key == "path":
        return raw or None
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


class RunConfig:
    """Parsed configuration file; every section defaults to the library defaults."""

    def __init__(self, train=None, embed=None, synth=None, dataset=None, out=None, base=Path(".")):
        self.train = train or {}
        self.embed = embed or {}
        self.synth = synth or {}
        self.dataset = dataset
        self.out = out
        self.base = base

    @classmethod
    def read(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls()
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        sections = {"train": {}, "embed": {}, "synth": {}}
        top = {}
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key in _TOP_LEVEL:
                top[key] = raw
                continue
            section, _, name = key.partition(".")
            if section not in _SECTIONS or name not in _SECTIONS[section]:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                sections[section][name] = _coerce(section, name, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        dataset = top.get("dataset")
        if dataset:
            dataset = str((path.parent / dataset) if not Path(dataset).is_absolute() else Path(dataset))
        return cls(sections["train"], sections["embed"], sections["synth"], dataset, top.get("out"), path.parent)

    def train_config(self, seed=None, **overrides) -> TrainConfig:
        values = dict(self.train)
        values.update({k: v for k, v in overrides.items() if v is not None})
        if seed is not None:
            values["seed"] = seed
        d = values.get("d", TrainConfig.d)
        emb = dict(self.embed)
        if emb.get("path") and not Path(emb["path"]).is_absolute():
            emb["path"] = str(self.base / emb["path"])
        values["embedder"] = EmbedderConfig(dimension=d, **emb)
        return TrainConfig(**values)

    def synth_config(self, seed=None) -> SyntheticConfig:
        values = dict(self.synth)
        if seed is not None:
            values["seed"] = seed
        return SyntheticConfig(**values)

    def snapshot(self) -> dict:
        return {"train": self.train, "embed": self.embed, "synth": self.synth, "dataset": self.dataset}


# -- shared plumbing ---------------------------------------------------------

def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(1)
        except (DataError, FileNotFoundError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(2)
        except NumericError as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _out_dir(out, cfg: RunConfig, default: str) -> Path:
    path = Path(out or cfg.out or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(cfg: RunConfig, dataset: Optional[str], tc: Optional[TrainConfig] = None, standardize=True):
    """Load the dataset; a manifest ``embeddings=`` file replaces the hashed embedder unless embed.kind is set."""
    path = dataset or cfg.dataset
    if not path:
        raise ConfigError("no dataset given; pass --dataset or set dataset= in the config")
    if not Path(path).is_file():
        raise DataError(f"manifest not found: {path}")
    manifest = DatasetManifest.read(path)
    hg = load_dataset(manifest, standardize=standardize)
    if tc is not None and manifest.embeddings is not None and "kind" not in cfg.embed:
        tc = replace(tc, embedder=replace(tc.embedder, kind="precomputed", path=str(manifest.embeddings)))
    return hg, tc


def _write_metrics(path, metrics):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["accuracy", "precision", "recall", "f1", "tn", "fp", "fn", "tp"])
        w.writerow([repr(metrics.accuracy), repr(metrics.precision), repr(metrics.recall), repr(metrics.f1),
                    *metrics.confusion])


def _write_split(path, hg, split):
    names = {}
    for name, idx in zip(("train", "val", "test"), split):
        for j in idx:
            names[int(j)] = name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge_id", "split"])
        for j, eid in enumerate(hg.edge_ids):
            w.writerow([eid, names.get(j, "unlabeled")])


_config_opt = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                           show_default="library defaults", help="key=value configuration file.")
_seed_opt = click.option("--seed", type=int, default=None, show_default="config value",
                         help="Master seed; overrides train.seed (synth.seed for gen-synth).")
_out_opt = click.option("--out", type=click.Path(file_okay=False), default=None, show_default="runs/<command>",
                        help="Output directory; overrides out= in the config.")
_dataset_opt = click.option("--dataset", type=click.Path(dir_okay=False), default=None,
                            show_default="dataset= from the config",
                            help="Dataset manifest; overrides dataset= in the config.")
_jobs_opt = click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                         help="Cross-validation folds run in this many worker processes.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--verbose", is_flag=True, default=False, show_default="off", help="Log training progress.")
def main(verbose):
    """Fake-news detection on user/news hypergraphs."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command("gen-synth")
@_config_opt
@_seed_opt
@_out_opt
@_exit_codes
def cmd_gen_synth(config_path, seed, out):
    """Write a planted synthetic dataset (manifest, nodes, edges, credibility)."""
    cfg = RunConfig.read(config_path)
    synth = cfg.synth_config(seed)
    directory = _out_dir(out, cfg, "runs/synthetic")
    hg, credible = generate_synthetic(synth)
    manifest = write_dataset(hg, directory)
    with open(directory / "credibility.tsv", "w", newline="\n") as fh:
        for uid, flag in zip(hg.node_ids, credible):
            fh.write(f"{uid}\t{int(flag)}\n")
    click.echo(f"wrote {hg.node_count} users, {hg.edge_count} news items -> {manifest}")


@main.command("train")
@_config_opt
@_seed_opt
@_out_opt
@_dataset_opt
@_exit_codes
def cmd_train(config_path, seed, out, dataset):
    """Train on the train split and score the held-out test split."""
    cfg = RunConfig.read(config_path)
    tc = cfg.train_config(seed)
    directory = _out_dir(out, cfg, "runs/train")
    hg, tc = _load(cfg, dataset, tc)
    problem = Problem(hg, tc)
    split = split_edges(problem.labels, tc.ratios, tc.seed)
    params, history = fit(problem, split[0], split[1], tc.seed, progress=True)
    _, metrics, _ = evaluate(problem, params, split[2])
    write_config_snapshot(directory / "config.json", tc, {"run": cfg.snapshot()})
    history.write(directory / "history.csv", directory / "timing.csv")
    save_checkpoint(directory / "checkpoint.npz", params, tc.seed, tc.as_dict())
    _write_metrics(directory / "metrics.csv", metrics)
    _write_split(directory / "split.csv", hg, split)
    plotting.plot_history(history, directory / "history.png")
    click.echo(f"test accuracy {metrics.accuracy:.4f}  precision {metrics.precision:.4f}  "
               f"recall {metrics.recall:.4f}  f1 {metrics.f1:.4f}")


@main.command("cv")
@_config_opt
@click.option("--folds", type=click.IntRange(min=2), default=None, show_default="train.folds, else 5",
              help="Number of folds; overrides train.folds.")
@_seed_opt
@_out_opt
@_dataset_opt
@_jobs_opt
@_exit_codes
def cmd_cv(config_path, folds, seed, out, dataset, jobs):
    """Stratified k-fold cross-validation of the full model."""
    cfg = RunConfig.read(config_path)
    tc = cfg.train_config(seed, folds=folds)
    directory = _out_dir(out, cfg, "runs/cv")
    hg, tc = _load(cfg, dataset, tc)
    report = kfold_cv(hg, tc, jobs=jobs)
    reports = {"full": report}
    analysis.write_metrics_table(directory / "cv_metrics.csv", reports)
    click.echo(analysis.format_metrics_table(reports))


@main.command("ablate")
@_config_opt
@click.option("--mode", type=click.Choice(MODES + ("all",)), default="all", show_default=True,
              help="Model variant to cross-validate, or all four.")
@click.option("--freeze-users", is_flag=True, default=False, show_default="off",
              help="users-only variant: train the autoencoder without the detection loss.")
@_seed_opt
@_out_opt
@_dataset_opt
@_jobs_opt
@_exit_codes
def cmd_ablate(config_path, mode, freeze_users, seed, out, dataset, jobs):
    """Cross-validate model variants and tabulate them."""
    cfg = RunConfig.read(config_path)
    tc = cfg.train_config(seed)
    directory = _out_dir(out, cfg, "runs/ablate")
    hg, tc = _load(cfg, dataset, tc)
    Ze = edge_features(hg, tc.embedder)
    modes = MODES if mode == "all" else (mode,)
    reports = {m: analysis.run_ablation(hg, tc, m, freeze_users, Ze, jobs) for m in modes}
    analysis.write_metrics_table(directory / "ablation.csv", reports)
    plotting.plot_ablation(reports, directory / "ablation.png")
    click.echo(analysis.format_metrics_table(reports))


@main.command("early-detect")
@_config_opt
@click.option("--cutoffs", default=DEFAULT_CUTOFFS, show_default=True,
              help="Comma-separated windows after publication (integer + s/m/h/d).")
@_seed_opt
@_out_opt
@_dataset_opt
@_exit_codes
def cmd_early_detect(config_path, cutoffs, seed, out, dataset):
    """Train once, then score test items seen only up to each cutoff."""
    cfg = RunConfig.read(config_path)
    tc = cfg.train_config(seed)
    cuts = [parse_cutoff(c) for c in cutoffs.split(",") if c.strip()]
    if not cuts:
        raise InvalidConfig("no cutoffs given")
    directory = _out_dir(out, cfg, "runs/early")
    hg, tc = _load(cfg, dataset, tc)
    result = analysis.early_detection(hg, tc, cuts)
    analysis.write_early_detection(directory, result)
    labels = [analysis.format_cutoff(c) for c in cuts]
    plotting.plot_early_detection(result, directory / "early_detection.png", labels)
    click.echo(f"{'cutoff':>8} {'accuracy':>9} {'participants':>13} {'incidences':>11}")
    for lab, acc, p, frac in zip(labels, result.accuracy, result.mean_participants, result.incidence_fraction):
        click.echo(f"{lab:>8} {acc:>9.4f} {p:>13.2f} {frac:>11.3f}")
    click.echo(f"{'all':>8} {result.full_accuracy:>9.4f}")


@main.command("analyze")
@_dataset_opt
@_config_opt
@_out_opt
@_exit_codes
def cmd_analyze(dataset, config_path, out):
    """Per-class participation statistics on raw (unstandardized) attributes."""
    cfg = RunConfig.read(config_path)
    directory = _out_dir(out, cfg, "runs/analyze")
    hg, _ = _load(cfg, dataset, standardize=False)
    stats = analysis.case_study_stats(hg)
    analysis.write_case_study(directory / "case_study.csv", stats)
    plotting.plot_case_study(stats, directory / "case_study.png")
    click.echo(f"{'':<26}{'real':>12}{'fake':>12}")

    def row(name, fn):
        cells = "".join(f"{fn(stats[c]):>12}" if c in stats else f"{'-':>12}" for c in (0, 1))
        click.echo(f"{name:<26}{cells}")

    row("news items", lambda s: s.edges)
    row("mean users per item", lambda s: f"{s.mean_users_per_edge:.2f}")
    row("distinct users", lambda s: s.distinct_users)
    row("co-participation density", lambda s: f"{s.projection_density:.4f}")


@main.command("export-embeddings")
@_config_opt
@click.option("--checkpoint", type=click.Path(dir_okay=False), default=None, show_default="train first",
              help="Use these trained parameters instead of training first.")
@_seed_opt
@_out_opt
@_dataset_opt
@_exit_codes
def cmd_export_embeddings(config_path, checkpoint, seed, out, dataset):
    """Write fused per-item embeddings with labels and predictions."""
    cfg = RunConfig.read(config_path)
    tc = cfg.train_config(seed)
    directory = _out_dir(out, cfg, "runs/embeddings")
    hg, tc = _load(cfg, dataset, tc)
    problem = Problem(hg, tc)
    if checkpoint:
        if not Path(checkpoint).is_file():
            raise DataError(f"checkpoint not found: {checkpoint}")
        params, _ = load_checkpoint(checkpoint)
        dims = params.dims
        if dims["edge_count"] != hg.edge_count or dims["dim"] != tc.d or dims["attr_dim"] != hg.attr_dim:
            raise ConfigError(f"checkpoint shapes {dims} do not fit this dataset/config")
    else:
        split = split_edges(problem.labels, tc.ratios, tc.seed)
        params, _ = fit(problem, split[0], split[1], tc.seed)
    out_ = problem.forward(params)
    analysis.export_embeddings(directory / "embeddings.tsv", hg, out_)
    click.echo(f"wrote {hg.edge_count} embeddings of width {out_.fused.shape[1]} -> {directory / 'embeddings.tsv'}")


if __name__ == "__main__":
    main()
