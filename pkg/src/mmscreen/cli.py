"""Command-line interface: ``mmscreen <subcommand> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
The thread count defaults to ``$MMSCREEN_THREADS`` (else 1); ``--threads``
overrides it.  Results do not depend on the thread count.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .errors import ConfigurationError, DataError, DispersionError, NumericalError
from .io import (
    load_id_list,
    load_labels,
    load_matrix,
    save_id_list,
    save_labels,
    save_layout,
    save_matrix,
    write_key_value,
)
from .pipeline import PipelineConfig, config_from_mapping, load_config, run_pipeline
from .postcluster import adjusted_rand, cluster_selected, hamming_error
from .simgen import GenSpec, LayoutKind, LayoutSpec, gen_expression, gen_layout, screening_metrics

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

PIPELINE_FLAGS = {
    "matrix": str,
    "matrix_format": str,
    "coords": str,
    "dist": str,
    "dist_format": str,
    "output": str,
    "model": str,
    "k_components": int,
    "max_iters": int,
    "rel_tol": float,
    "beta": float,
    "m_phi": float,
    "q0": float,
    "d_pcs": int,
    "k_clusters": int,
    "n_init": int,
    "seed": int,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_pipeline_args(p):
    p.add_argument("--config", help="key=value configuration file")
    for name, typ in PIPELINE_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--log-input", action="store_true", default=None, help="log1p-transform values (not for acceptance)")


def build_parser():
    parser = _Parser(prog="mmscreen", description="MM-test screening of spatially variable genes")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("screen", help="MM-test statistics only")
    _add_pipeline_args(p)
    p = sub.add_parser("knockoff", help="statistics plus the knockoff FDR filter")
    _add_pipeline_args(p)
    p.add_argument("--no-knockoff", action="store_true", help="skip the filter (same as 'screen')")

    p = sub.add_parser("cluster", help="PCA + k-means on a selected gene list")
    p.add_argument("--matrix", required=True)
    p.add_argument("--matrix-format", default="dense")
    p.add_argument("--genes", required=True, help="file with one selected gene id per line")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--pcs", type=int, default=10)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="labels file to write")

    p = sub.add_parser("simulate", help="write a synthetic dataset and manifest")
    p.add_argument("--layout", choices=["square", "file"], default="square")
    p.add_argument("--layout-file")
    p.add_argument("--n", type=int, default=900)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--p", type=int, default=3000)
    p.add_argument("--s", type=int, default=100)
    p.add_argument("--dist", choices=["nb", "pln"], default="nb")
    p.add_argument("--signal", choices=["high", "low"], default="high")
    p.add_argument("--zero-rate", type=float, default=0.30)
    p.add_argument("--base-mean", type=float, default=5.0)
    p.add_argument("--nb-size", type=float, default=2.0)
    p.add_argument("--pln-sigma", type=float, default=0.5)
    p.add_argument("--fold-high", type=float, default=3.0)
    p.add_argument("--fold-low", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset directory")

    p = sub.add_parser("evaluate", help="power/FDR/AUPRC and ARI against truth files")
    p.add_argument("--report", help="per-gene report from screen/knockoff")
    p.add_argument("--truth", help="file listing truly relevant gene ids")
    p.add_argument("--labels", help="predicted labels file")
    p.add_argument("--truth-labels", help="true labels file (or a layout file)")

    p = sub.add_parser("bench", help="replicated simulation summary (values x100)")
    p.add_argument("--scenario", default="layout1-high", choices=sorted(bench_mod.SCENARIOS))
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--q0", type=float, default=0.05)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-cluster", action="store_true")
    return parser


def _pipeline_config(args, knockoff):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {k: getattr(args, k) for k in list(PIPELINE_FLAGS) + ["log_input"] if getattr(args, k) is not None}
    cfg = config_from_mapping(overrides, cfg)
    return replace(cfg, knockoff=knockoff)


def _cmd_pipeline(args, knockoff):
    cfg = _pipeline_config(args, knockoff)
    res = run_pipeline(cfg, threads=args.threads)
    print(f"report: {res.report_path}")
    print(f"summary: {res.summary_path}")
    if res.labels_path:
        print(f"labels: {res.labels_path}")
    if knockoff:
        print(f"threshold: {res.summary['threshold']}  selected: {res.summary['n_selected']}")
    return EXIT_OK


def _cmd_cluster(args):
    X = load_matrix(args.matrix, args.matrix_format)
    wanted = load_id_list(args.genes)
    index = {g: j for j, g in enumerate(X.gene_ids)}
    missing = [g for g in wanted if g not in index]
    if missing:
        raise DataError(f"unknown gene ids in {args.genes}: {missing[:5]}")
    res = cluster_selected(X.values, [index[g] for g in wanted], args.k, args.pcs, args.seed, args.n_init, args.threads)
    save_labels(args.out, X.spot_ids, res.labels)
    print(f"labels: {args.out}  inertia: {res.inertia!r}")
    return EXIT_OK


def _cmd_simulate(args):
    if args.layout == "file":
        if not args.layout_file:
            raise ConfigurationError("--layout file needs --layout-file")
        lspec = LayoutSpec(LayoutKind.FROM_FILE, path=args.layout_file)
    else:
        lspec = LayoutSpec(LayoutKind.SQUARE_GRID, args.n, args.k)
    layout = gen_layout(lspec)
    gspec = GenSpec(
        p=args.p, s=args.s, dist=args.dist, signal=args.signal, zero_rate=args.zero_rate,
        base_mean=args.base_mean, nb_size=args.nb_size, pln_sigma=args.pln_sigma,
        fold_high=args.fold_high, fold_low=args.fold_low, seed=args.seed,
    )
    X, truth = gen_expression(layout, gspec, args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix(X, out / "matrix.tsv")
    save_layout(layout, out / "layout.tsv")
    save_labels(out / "truth_labels.tsv", layout.spot_ids, layout.labels)
    save_id_list(out / "truth_genes.txt", [X.gene_ids[j] for j in truth])
    manifest = {"layout": lspec.kind.value, "n": layout.n, "k": layout.K}
    manifest.update(gspec.as_dict())
    manifest.update({"matrix": "matrix.tsv", "layout_file": "layout.tsv", "truth_genes": "truth_genes.txt",
                     "truth_labels": "truth_labels.tsv", "rng": "PCG64/SeedSequence([seed, 3, gene])"})
    write_key_value(out / "manifest.txt", manifest)
    print(f"dataset: {out}")
    return EXIT_OK


def _read_report(path):
    ids, stats, selected = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            ids.append(parts[0])
            stats.append(float(parts[1]))
            if "selected" in header:
                selected.append(parts[header.index("selected")] == "1")
    return ids, np.array(stats), (np.array(selected) if selected else None)


def _cmd_evaluate(args):
    did = False
    if args.report and args.truth:
        ids, stats, sel = _read_report(args.report)
        pos = {g: j for j, g in enumerate(ids)}
        truth = [pos[g] for g in load_id_list(args.truth) if g in pos]
        m = screening_metrics(truth, stats=stats, selected=None if sel is None else np.flatnonzero(sel))
        for k, v in m.items():
            print(f"{k}\t{v!r}")
        did = True
    if args.labels and args.truth_labels:
        pid, plab = load_labels(args.labels)
        tid, tlab = load_labels(args.truth_labels)
        tmap = dict(zip(tid, tlab))
        if set(pid) != set(tid):
            raise DataError("label files cover different spots")
        truth = np.array([tmap[s] for s in pid])
        print(f"ari\t{adjusted_rand(plab, truth)!r}")
        print(f"hamming\t{hamming_error(plab, truth)!r}")
        did = True
    if not did:
        raise ConfigurationError("evaluate needs --report/--truth and/or --labels/--truth-labels")
    return EXIT_OK


def _cmd_bench(args):
    sc = bench_mod.get_scenario(args.scenario, p=args.p, s=args.s)
    recs = bench_mod.run_bench(sc, args.reps, q0=args.q0, base_seed=args.seed,
                               cluster=not args.no_cluster, threads=args.threads)
    print(bench_mod.format_table(sc.name, recs))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "screen":
            return _cmd_pipeline(args, knockoff=False)
        if args.command == "knockoff":
            return _cmd_pipeline(args, knockoff=not args.no_knockoff)
        if args.command == "cluster":
            return _cmd_cluster(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        return _cmd_bench(args)
    except (ConfigurationError, KeyError) as exc:
        print(f"mmscreen: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DispersionError, NumericalError) as exc:
        print(f"mmscreen: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
