"""End-to-end screening run: load, screen, knockoff filter, cluster, write."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigurationError, DomainError
from .io import (
    format_value,
    load_coordinates,
    load_distances,
    load_matrix,
    read_key_value,
    save_labels,
    write_key_value,
)
from .knockoff import run_knockoff_filter
from .mmtest import MMConfig, screen_all
from .neighborhood import AuxiliarySpace, build_neighbors
from .postcluster import cluster_selected
from .qlik import get_model

log = logging.getLogger(__name__)

REPORT = "report.tsv"
SUMMARY = "summary.txt"
LABELS = "labels.tsv"


@dataclass(frozen=True)
class PipelineConfig:
    matrix: str = ""
    matrix_format: str = "dense"
    coords: Optional[str] = None
    dist: Optional[str] = None
    dist_format: str = "dense"
    output: str = "mmscreen-out"
    model: str = "quasi-negbinomial"
    k_components: int = 2
    max_iters: int = 100
    rel_tol: float = 1e-8
    beta: float = 0.9
    m_phi: float = 0.01
    q0: float = 0.05
    knockoff: bool = True
    d_pcs: int = 10
    k_clusters: Optional[int] = None
    n_init: int = 10
    seed: int = 0
    log_input: bool = False

    def mm_config(self):
        try:
            model = get_model(self.model)
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from None
        return MMConfig(
            k_components=self.k_components,
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            seed=self.seed,
            model=model,
            beta=self.beta,
            m_phi=self.m_phi,
        )

    def validate(self):
        if not self.matrix:
            raise ConfigurationError("no expression matrix given")
        if (self.coords is None) == (self.dist is None):
            raise ConfigurationError("give exactly one of coordinates or a distance matrix")
        if not 0 < self.q0 < 1:
            raise ConfigurationError("q0 must lie in (0, 1)")
        if self.k_clusters is not None and self.k_clusters < 1:
            raise ConfigurationError("k_clusters must be positive")
        self.mm_config()

    def as_dict(self):
        return dataclasses.asdict(self)


def _coerce(field, raw):
    typ = str(field.type)
    if raw in ("", "None", "none") and "Optional" in typ:
        return None
    try:
        if "bool" in typ:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in typ:
            return int(raw)
        if "float" in typ:
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"bad value {raw!r} for {field.name}") from None
    return raw


def config_from_mapping(mapping, base=None):
    """Build a :class:`PipelineConfig` from string key/value pairs."""
    base = base or PipelineConfig()
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    updates = {}
    for key, raw in mapping.items():
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        updates[key] = raw if not isinstance(raw, str) else _coerce(fields[key], raw)
    return dataclasses.replace(base, **updates)


def load_config(path):
    return config_from_mapping(read_key_value(path))


def load_space(cfg, n):
    if cfg.coords is not None:
        coords, _ = load_coordinates(cfg.coords)
        space = AuxiliarySpace.from_coordinates(coords)
    else:
        space = AuxiliarySpace.from_distances(load_distances(cfg.dist, cfg.dist_format, n))
    if space.n != n:
        raise ConfigurationError(f"matrix has {n} spots but the auxiliary space has {space.n}")
    return space


@dataclass
class PipelineResult:
    summary: dict
    report_path: Path
    summary_path: Path
    labels_path: Optional[Path]
    run: object


def run_pipeline(cfg, threads=None):
    """Run screening (and optionally knockoff filtering and clustering).

    Writes ``report.tsv`` (per gene, sorted by statistic), ``summary.txt``
    (key=value) and, when clustering ran, ``labels.tsv`` into ``cfg.output``.
    """
    t0 = time.perf_counter()
    cfg.validate()
    X = load_matrix(cfg.matrix, cfg.matrix_format)
    X, dropped = X.drop_all_zero()
    if dropped:
        log.info("dropped %d all-zero genes", dropped)
    if X.n_genes == 0:
        raise ConfigurationError("no non-zero genes left after filtering")
    values = np.log1p(X.values) if cfg.log_input else X.values
    if cfg.log_input:
        X = type(X)(values, X.spot_ids, X.gene_ids)
    space = load_space(cfg, X.n_spots)
    mm_cfg = cfg.mm_config()
    nbr = build_neighbors(space, cfg.beta)

    warnings = []
    labels = None
    if cfg.knockoff:
        run = run_knockoff_filter(X, nbr, mm_cfg, cfg.q0, cfg.seed, threads=threads)
        stats, knock = run.orig_stats, run.knock_stats_scaled
        selected = np.zeros(X.n_genes, dtype=bool)
        selected[run.selected] = True
        threshold = run.threshold
        if cfg.k_clusters is not None:
            if run.selected.size == 0:
                warnings.append("empty selection: clustering skipped")
                log.warning("empty selection: clustering skipped")
            else:
                res = cluster_selected(
                    X.values, run.selected, cfg.k_clusters, cfg.d_pcs, cfg.seed, cfg.n_init, threads
                )
                labels = res.labels
    else:
        run = screen_all(X, nbr, mm_cfg, threads=threads)
        stats, knock, selected, threshold = run.mm_stat, None, None, None

    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / REPORT
    order = np.lexsort((np.arange(X.n_genes), -stats))
    with open(report_path, "w", encoding="utf-8") as fh:
        head = ["gene_id", "mm_stat"] + (["knock_stat_scaled", "selected"] if cfg.knockoff else [])
        fh.write("\t".join(head) + "\n")
        for j in order:
            row = [X.gene_ids[j], repr(float(stats[j]))]
            if cfg.knockoff:
                row += [repr(float(knock[j])), str(int(selected[j]))]
            fh.write("\t".join(row) + "\n")
    labels_path = None
    if labels is not None:
        labels_path = out / LABELS
        save_labels(labels_path, X.spot_ids, labels)

    summary = {f"config.{k}": v for k, v in cfg.as_dict().items()}
    summary.update(
        {
            "version": __version__,
            "r_n": nbr.r_n,
            "n_spots": X.n_spots,
            "n_genes": X.n_genes,
            "n_dropped_all_zero": dropped,
            "threshold": "none" if threshold is None else (math.inf if math.isinf(threshold) else threshold),
            "n_selected": "none" if selected is None else int(selected.sum()),
            "clustered": labels is not None,
            "warnings": "; ".join(warnings) if warnings else "none",
            "wall_time_s": format_value(round(time.perf_counter() - t0, 3)),
        }
    )
    summary_path = out / SUMMARY
    write_key_value(summary_path, summary)
    return PipelineResult(summary, report_path, summary_path, labels_path, run)
