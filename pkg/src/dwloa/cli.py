"""Command line interface: ``dwloa {inspect,kernel,mkl,run,report}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import bench
from .errors import DwloaError, ResourceExhaustedError
from .graphs import dataset_stats, load_tudataset
from .kernels import KernelMatrix, normalize_unit_diagonal, wl_subtree_matrix, wloa_matrix, write_kernel
from .mkl import learn_weights
from .refinement import refine_colors

EXIT_ERROR = 2
EXIT_OOM = 3


def _grid(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _dataset_args(p, required=True):
    p.add_argument("--dataset", required=required, help="directory holding the TUDataset files")
    p.add_argument("--name", help="dataset name (default: directory name)")
    p.add_argument("--node-labels", action="store_true", help="use vertex labels as initial colors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwloa", description="Weisfeiler-Lehman assignment kernels with learned weights.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print dataset statistics")
    _dataset_args(p)

    p = sub.add_parser("kernel", help="compute and export a kernel matrix")
    _dataset_args(p)
    p.add_argument("--method", choices=("wl", "wloa", "dwloa"), default="wloa")
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--weights", help="node weight file written by 'dwloa mkl' (dwloa only)")
    p.add_argument("--k", type=int, default=10, help="clusters when learning weights; 0 = one weight per node")
    p.add_argument("--lambda", dest="lam", type=float, help="learn weights on the whole dataset with this lambda")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "precomputed", "json"), default="csv")

    p = sub.add_parser("mkl", help="learn hierarchy weights on the whole dataset")
    _dataset_args(p)
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--k", type=int, default=10, help="number of node clusters; 0 = one weight per node")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("run", help="run the cross-validation benchmark")
    _dataset_args(p, required=False)
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--method", choices=bench.METHODS)
    p.add_argument("--h", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--c-grid", type=_grid)
    p.add_argument("--lambda-grid", type=_grid)
    p.add_argument("--seed", type=int)
    p.add_argument("--normalize", action="store_true", default=None)
    p.add_argument("--memory-cap", help="e.g. 512M or 4G; exceeding it reports OOM")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in report.json")

    p = sub.add_parser("report", help="combine report.json files into a comparison table")
    p.add_argument("reports", nargs="+", help="report.json files or directories containing one")
    p.add_argument("--out", help="write <out>.txt and <out>.csv instead of printing")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    return parser


def _load(args):
    name = args.name or os.path.basename(os.path.normpath(args.dataset))
    return load_tudataset(args.dataset, name, use_node_labels=args.node_labels)


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w")


def cmd_inspect(args) -> int:
    print(dataset_stats(_load(args)).format())
    return 0


def _read_node_weights(path: str, n_nodes: int) -> np.ndarray:
    weights = np.full(n_nodes, np.nan)
    with open(path) as fh:
        rows = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = rows[0].split(",")
    node_col, w_col = header.index("node"), header.index("weight")
    for ln in rows[1:]:
        parts = ln.split(",")
        weights[int(parts[node_col])] = float(parts[w_col])
    if np.isnan(weights).any():
        raise DwloaError(f"{path}: weights missing for {int(np.isnan(weights).sum())} of {n_nodes} hierarchy nodes")
    return weights


def _learn_node_weights(ds, hier, k: int, lam: float, seed: int):
    family = bench.kernel_family(hier, None if k == 0 else k, seed)
    w = learn_weights(family, ds.class_label, lam)
    return family, w


def cmd_kernel(args) -> int:
    ds = _load(args)
    hier = refine_colors(ds, args.h)
    if args.method == "wl":
        K = wl_subtree_matrix(hier)
    elif args.method == "wloa":
        K = wloa_matrix(hier)
    else:
        if args.weights:
            weights = _read_node_weights(args.weights, hier.n_nodes)
            source = f"weights={os.path.basename(args.weights)}"
        elif args.lam is not None:
            family, w = _learn_node_weights(ds, hier, args.k, args.lam, args.seed)
            weights = family.node_weights(w.alpha)
            source = f"lambda={args.lam} k={args.k} seed={args.seed}"
        else:
            raise DwloaError("--method dwloa needs --weights FILE or --lambda VALUE")
        K = wloa_matrix(hier.with_weights(weights))
        K = KernelMatrix(K.values, f"dwloa h={args.h} {source}")
    if args.normalize:
        K = normalize_unit_diagonal(K)
    K = KernelMatrix(K.values, f"dataset={ds.name} n={K.n} {K.provenance} normalize={args.normalize}")
    fh = _open_out(args.out)
    try:
        write_kernel(K, fh, args.format, labels=ds.class_label)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_mkl(args) -> int:
    ds = _load(args)
    hier = refine_colors(ds, args.h)
    family, w = _learn_node_weights(ds, hier, args.k, args.lam, args.seed)
    node_w = family.node_weights(w.alpha)
    fh = _open_out(args.out)
    try:
        fh.write(f"# dataset={ds.name} h={args.h} k={args.k} groups={family.n_kernels} lambda={args.lam} seed={args.seed}\n")
        fh.write(f"# iterations={w.n_iter} converged={w.converged} objective={format(w.objective_trace[-1], '.17g')} "
                 f"degenerate={w.degenerate} zero_fraction={format(w.sparsity, '.6g')}\n")
        fh.write("node,level,color,group,weight\n")
        for node in range(hier.n_nodes):
            lvl = int(hier.level[node])
            fh.write(f"{node},{lvl},{node - int(hier.level_offsets[lvl])},{int(family.node_group[node])},"
                     f"{format(float(node_w[node]), '.17g')}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_run(args) -> int:
    run_opts, method_opts = ({}, {})
    if args.config:
        run_opts, method_opts = bench.read_run_config(args.config)
    dataset_dir = args.dataset or run_opts.get("dataset")
    if not dataset_dir:
        raise DwloaError("no dataset given (use --dataset or a config file)")
    if args.config and not os.path.isabs(dataset_dir) and not args.dataset:
        candidate = os.path.join(os.path.dirname(os.path.abspath(args.config)), dataset_dir)
        dataset_dir = candidate if os.path.isdir(candidate) else dataset_dir
    name = args.name or run_opts.get("name") or os.path.basename(os.path.normpath(dataset_dir))
    ds = load_tudataset(dataset_dir, name, use_node_labels=args.node_labels or run_opts.get("node_labels", False))
    config = bench.MethodConfig(**method_opts)
    config = bench.config_with(
        config, method=args.method, h=args.h, k_clusters=args.k, C_grid=args.c_grid, lambda_grid=args.lambda_grid,
        seed=args.seed, normalize=args.normalize,
        memory_cap=bench.parse_bytes(args.memory_cap) if args.memory_cap is not None else None,
    )
    report = bench.run_experiment(ds, config, jobs=max(1, args.jobs))
    bench.write_report(report, args.out, include_timing=args.timings)
    text, _ = bench.summarize([report])
    sys.stdout.write(text)
    if report.status == "OOM":
        print(f"error: resource limit: {report.error}", file=sys.stderr)
        return EXIT_OOM
    return 0


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        if os.path.isdir(path):
            path = os.path.join(path, "report.json")
        reports.append(bench.read_report(path))
    text, table_csv = bench.summarize(reports)
    if args.out:
        with open(args.out + ".txt", "w") as fh:
            fh.write(text)
        with open(args.out + ".csv", "w") as fh:
            fh.write(table_csv)
    else:
        sys.stdout.write(table_csv if args.format == "csv" else text)
    return 0


COMMANDS = {"inspect": cmd_inspect, "kernel": cmd_kernel, "mkl": cmd_mkl, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ResourceExhaustedError as exc:
        print(f"error: resource limit: {exc}", file=sys.stderr)
        return EXIT_OOM
    except (DwloaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
