"""Replicated simulation studies: power, FDR, AUPRC and ARI per scenario."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .knockoff import run_knockoff_filter
from .mmtest import MMConfig, screen_all
from .neighborhood import AuxiliarySpace, build_neighbors
from .postcluster import adjusted_rand, cluster_selected
from .simgen import GenSpec, LayoutSpec, auprc, gen_expression, gen_layout, screening_metrics


@dataclass(frozen=True)
class Scenario:
    name: str
    layout: LayoutSpec
    gen: GenSpec


SCENARIOS = {
    "layout1-high": Scenario("layout1-high", LayoutSpec(), GenSpec(p=3000, s=100, signal="high")),
    "layout1-low": Scenario("layout1-low", LayoutSpec(), GenSpec(p=3000, s=100, signal="low")),
    "layout1-high-pln": Scenario("layout1-high-pln", LayoutSpec(), GenSpec(p=3000, s=100, dist="pln", signal="high")),
    "layout1-low-pln": Scenario("layout1-low-pln", LayoutSpec(), GenSpec(p=3000, s=100, dist="pln", signal="low")),
    "layout1-null": Scenario("layout1-null", LayoutSpec(), GenSpec(p=500, s=0, zero_rate=0.0)),
}


def get_scenario(name, **overrides):
    try:
        sc = SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    gen_over = {k: v for k, v in overrides.items() if v is not None}
    return replace(sc, gen=replace(sc.gen, **gen_over)) if gen_over else sc


def replicate(scenario, rep, *, q0=0.05, base_seed=0, knockoff=True, cluster=True,
              cfg=None, threads=None, nbr=None, layout=None, keep_arrays=False):
    """One replicate: simulate with seed ``base_seed + rep``, screen, filter, cluster.

    With ``keep_arrays`` the record also holds the full statistic vectors,
    the selection and the cluster labels under ``"arrays"``.
    """
    seed = base_seed + rep
    layout = layout if layout is not None else gen_layout(scenario.layout)
    if nbr is None:
        nbr = build_neighbors(AuxiliarySpace.from_coordinates(layout.coords))
    X, truth = gen_expression(layout, replace(scenario.gen, seed=seed), threads)
    cfg = replace(cfg or MMConfig(), seed=seed)
    rec = {"rep": rep, "seed": seed}
    arrays = {}
    if knockoff:
        run = run_knockoff_filter(X, nbr, cfg, q0, seed, threads=threads)
        stats = run.orig_stats
        arrays.update(knock=run.knock_stats_scaled, selected=run.selected)
        rec["threshold"] = run.threshold
        rec["n_selected"] = run.n_selected
        rec["n_false"] = int(np.setdiff1d(run.selected, truth).size)
        rec["fdr"] = rec["n_false"] / max(run.n_selected, 1)
        if truth.size:
            rec["power"] = screening_metrics(truth, selected=run.selected)["power"]
        if cluster:
            if run.n_selected:
                res = cluster_selected(X.values, run.selected, layout.K, seed=seed, threads=threads)
                rec["ari"] = adjusted_rand(res.labels, layout.labels)
                arrays["labels"] = res.labels
            else:
                rec["ari"] = 0.0
    else:
        stats = screen_all(X, nbr, cfg, threads=threads).mm_stat
    if truth.size:
        rec["auprc"] = auprc(stats, truth)
        rec["var_auprc"] = auprc(X.values.var(axis=0), truth)
    rec["stat_digest"] = float(np.sum(stats * np.arange(1, stats.size + 1)))
    if keep_arrays:
        arrays["stats"] = stats
        rec["arrays"] = arrays
    return rec


def run_bench(scenario, reps, *, q0=0.05, base_seed=0, knockoff=True, cluster=True, cfg=None, threads=None,
              keep_arrays=False):
    layout = gen_layout(scenario.layout)
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(layout.coords))
    return [
        replicate(scenario, r, q0=q0, base_seed=base_seed, knockoff=knockoff, cluster=cluster,
                  cfg=cfg, threads=threads, nbr=nbr, layout=layout, keep_arrays=keep_arrays)
        for r in range(reps)
    ]


def summarize(records, keys=("power", "fdr", "auprc", "ari")):
    """Mean and SD (ddof=1) of each metric, as actual values."""
    out = {}
    for k in keys:
        vals = np.array([r[k] for r in records if k in r], dtype=float)
        if vals.size:
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            out[k] = (float(vals.mean()), sd)
    return out


def format_table(name, records):
    """One row per metric in the ``mean (SD)`` x100 style."""
    summ = summarize(records)
    lines = [f"scenario\t{name}\treps\t{len(records)}", "metric\tmean x100 (SD x100)"]
    for k, (m, s) in summ.items():
        lines.append(f"{k}\t{100 * m:.0f} ({100 * s:.1f})")
    return "\n".join(lines)
