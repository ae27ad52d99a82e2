"""Repeated cross-validation harness for WL, WL-OA, DWL-OA1 and DWL-OA2."""
from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from .errors import ResourceExhaustedError
from .graphs import GraphDataset
from .grouping import kmeans, node_feature_vectors
from .kernels import GroupedKernels, KernelMatrix, dense_bytes, normalize_unit_diagonal, wl_subtree_matrix, wloa_matrix
from .mkl import MKLWeights, learn_weights
from .refinement import ColorHierarchy, refine_colors
from .svm import predict, train_svm

log = logging.getLogger(__name__)

METHODS = ("WL", "WL-OA", "DWL-OA1", "DWL-OA2")
DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_LAMBDA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class MethodConfig:
    method: str = "WL-OA"
    h: int = 4
    k_clusters: int = 10
    normalize: bool = False
    C_grid: tuple = DEFAULT_C_GRID
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    seed: int = 0
    folds: int = 5
    repeats: int = 5
    inner_folds: int = 5
    stratified: bool = True
    memory_cap: int | None = None
    mkl_tol: float = 1e-6
    mkl_max_iter: int = 1000
    svm_tol: float = 1e-3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.h < 0:
            raise ValueError("h must be non-negative")
        if not self.C_grid or not self.lambda_grid:
            raise ValueError("hyperparameter grids must be non-empty")
        if any(c <= 0 for c in self.C_grid):
            raise ValueError("C values must be positive")
        if any(not 0 <= lam <= 1 for lam in self.lambda_grid):
            raise ValueError("lambda values must lie in [0, 1]")
        if self.method == "DWL-OA2" and self.k_clusters < 1:
            raise ValueError("k_clusters must be at least 1 for DWL-OA2")
        if self.folds < 2 or self.inner_folds < 2 or self.repeats < 1:
            raise ValueError("need at least 2 folds and 1 repeat")
        object.__setattr__(self, "C_grid", tuple(sorted(float(c) for c in self.C_grid)))
        object.__setattr__(self, "lambda_grid", tuple(sorted(float(x) for x in self.lambda_grid)))

    @property
    def deep(self) -> bool:
        return self.method.startswith("DWL")


@dataclass
class CVReport:
    dataset: str
    config: MethodConfig
    status: str = "ok"
    accuracy: list = field(default_factory=list)  # repeats x folds, fractions
    mean_accuracy: float = float("nan")
    std_dev: float = float("nan")
    chosen: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    mkl: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    error: str | None = None

    @property
    def repeat_means(self) -> list:
        return [float(np.mean(row)) for row in self.accuracy]

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "dataset": self.dataset,
            "method": self.config.method,
            "status": self.status,
            "mean_accuracy": self.mean_accuracy,
            "std_dev": self.std_dev,
            "repeat_means": self.repeat_means,
            "accuracy": self.accuracy,
            "chosen": self.chosen,
            "mkl": self.mkl,
            "alphas": self.alphas,
            "notes": self.notes,
            "error": self.error,
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.config).items()},
        }
        if include_timing:
            out["timing"] = self.timing
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "CVReport":
        cfg = dict(obj["config"])
        cfg["C_grid"] = tuple(cfg["C_grid"])
        cfg["lambda_grid"] = tuple(cfg["lambda_grid"])
        return cls(
            dataset=obj["dataset"], config=MethodConfig(**cfg), status=obj["status"],
            accuracy=obj["accuracy"], mean_accuracy=obj["mean_accuracy"], std_dev=obj["std_dev"],
            chosen=obj["chosen"], alphas=obj.get("alphas", []), mkl=obj.get("mkl", []),
            timing=obj.get("timing", {}), notes=obj.get("notes", []), error=obj.get("error"),
        )


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])


def make_folds(labels, n_folds: int, seed: int, stratified: bool = True):
    """Shuffled (train, test) index pairs; stratified by class when requested."""
    labels = np.asarray(labels)
    splitter = (StratifiedKFold if stratified else KFold)(n_splits=n_folds, shuffle=True, random_state=seed)
    return [(np.sort(tr), np.sort(te)) for tr, te in splitter.split(np.zeros(labels.size), labels)]


def parse_bytes(text) -> int | None:
    """Parse sizes such as ``512M`` or ``4G``; empty or ``none`` means no cap."""
    if text is None:
        return None
    if isinstance(text, (int, np.integer)):
        return int(text)
    text = str(text).strip().upper()
    if text in ("", "NONE", "0"):
        return None
    units = {"K": 2 ** 10, "M": 2 ** 20, "G": 2 ** 30, "T": 2 ** 40}
    if text.endswith("B"):
        text = text[:-1]
    if text and text[-1] in units:
        return int(float(text[:-1]) * units[text[-1]])
    return int(float(text))


def estimate_memory(method: str, n: int, n_train: int, n_kernels: int) -> int:
    """Peak bytes for the dense matrices a method holds.

    Every method keeps the full kernel plus a working copy. The deep
    variants additionally hand one training Gram matrix per learnable
    weight to the MKL solver: ``k`` of them with grouping, one per
    hierarchy node without it.
    """
    base = dense_bytes(n, 2)
    if method in ("DWL-OA1", "DWL-OA2"):
        return base + dense_bytes(n_train, n_kernels)
    return base


def check_memory(method: str, n: int, n_train: int, n_kernels: int, cap: int | None) -> int:
    need = estimate_memory(method, n, n_train, n_kernels)
    if cap is not None and need > cap:
        raise ResourceExhaustedError(
            f"{method} needs about {need / 2 ** 30:.2f} GiB for {n_kernels} kernel matrices of order {n_train} "
            f"(cap {cap / 2 ** 30:.2f} GiB)",
            required_bytes=need, cap_bytes=cap,
        )
    return need


def pipeline_dwloa(hier: ColorHierarchy, train_index, labels, k_clusters: int | None, lam: float,
                   seed: int = 0, normalize: bool = False, tol: float = 1e-6, max_iter: int = 1000):
    """Learn hierarchy weights on ``train_index`` and build the full combined kernel.

    ``k_clusters=None`` keeps one weight per hierarchy node (DWL-OA1);
    otherwise nodes are grouped by k-means on their count vectors (DWL-OA2).
    ``labels`` covers the whole dataset. Returns ``(kernel, weights)``.
    """
    family = kernel_family(hier, k_clusters, seed)
    train_index = np.asarray(train_index)
    weights = learn_weights(family, np.asarray(labels)[train_index], lam, index=train_index, tol=tol, max_iter=max_iter)
    K = family.combine(weights.alpha)
    if normalize:
        K = normalize_unit_diagonal(K)
    return K, weights


def kernel_family(hier: ColorHierarchy, k_clusters: int | None, seed: int = 0) -> GroupedKernels:
    if k_clusters is None:
        return GroupedKernels(hier, np.arange(hier.n_nodes))
    assignment = kmeans(node_feature_vectors(hier), k_clusters, seed=seed)
    return GroupedKernels(hier, assignment.assignment, assignment.k)


def _select(scores: dict):
    """Best (C, lam) by mean inner accuracy; ties go to smaller C, then smaller lam."""
    best_key, best = None, -1.0
    for key in sorted(scores, key=lambda kv: (kv[0], -1.0 if kv[1] is None else kv[1])):
        if scores[key] > best:
            best_key, best = key, scores[key]
    return best_key, best


def run_fold(source, labels, train, test, config: MethodConfig, inner_seed: int) -> dict:
    """Nested model selection and evaluation for one outer fold.

    ``source`` is a :class:`KernelMatrix` (WL, WL-OA) or a kernel family whose
    weights are learned per fold (deep variants). Only rows and columns in
    ``train`` influence the fitted models.
    """
    labels = np.asarray(labels)
    y_train = labels[train]
    candidates: dict = {}
    weights: dict = {}
    if isinstance(source, KernelMatrix):
        candidates[None] = source.values
    else:
        for lam in config.lambda_grid:
            w = learn_weights(source, y_train, lam, index=train, tol=config.mkl_tol, max_iter=config.mkl_max_iter)
            K = source.combine(w.alpha)
            if config.normalize:
                K = normalize_unit_diagonal(K)
            candidates[lam] = K.values
            weights[lam] = w
    inner = make_folds(y_train, config.inner_folds, inner_seed, config.stratified)
    scores = {}
    for lam, K in candidates.items():
        K_tr = np.asarray(K[np.ix_(train, train)], dtype=np.float64)
        for C in config.C_grid:
            accs = []
            for itr, ite in inner:
                model = train_svm(K_tr[np.ix_(itr, itr)], y_train[itr], C, tol=config.svm_tol)
                accs.append(float(np.mean(predict(model, K_tr[np.ix_(ite, itr)]) == y_train[ite])))
            scores[(C, lam)] = float(np.mean(accs))
    (C, lam), inner_acc = _select(scores)
    K = candidates[lam]
    model = train_svm(np.asarray(K[np.ix_(train, train)], dtype=np.float64), y_train, C, tol=config.svm_tol,
                      train_index=train)
    acc = float(np.mean(predict(model, np.asarray(K[np.ix_(test, train)], dtype=np.float64)) == labels[test]))
    out = {"accuracy": acc, "C": C, "lambda": lam, "inner_accuracy": inner_acc}
    if lam is not None:
        w: MKLWeights = weights[lam]
        out["alpha"] = w.alpha.tolist()
        out["mkl"] = {
            "lambda": lam,
            "iterations": w.n_iter,
            "converged": w.converged,
            "objective": w.objective_trace[-1],
            "degenerate": w.degenerate,
            "zero_fraction": w.sparsity,
            "n_kernels": int(w.alpha.size),
        }
    return out


def _fold_task(args):
    return run_fold(*args)


def run_experiment(dataset: GraphDataset, config: MethodConfig, jobs: int = 1) -> CVReport:
    """Repeated outer cross-validation with inner model selection.

    The hierarchy (and, for DWL-OA2, the node clustering) is built once on
    the whole dataset; MKL and SVM only ever see training-fold entries.
    Exceeding ``config.memory_cap`` yields a report with status ``OOM``.
    """
    report = CVReport(dataset=dataset.name, config=config)
    report.notes = [
        "hierarchy and node clustering computed on the full dataset",
        f"outer folds {'stratified' if config.stratified else 'unstratified'}, {config.inner_folds}-fold inner CV",
        f"kernel normalization {'on' if config.normalize else 'off'}",
        "std is taken over repeat means",
    ]
    if config.deep:
        report.notes.append("MKL weights learned on the outer training fold for each lambda before inner CV")
    labels = dataset.class_label
    n = len(dataset)
    n_train = n - n // config.folds
    timing = {}
    try:
        t0 = time.perf_counter()
        hier = refine_colors(dataset, config.h)
        timing["hierarchy"] = time.perf_counter() - t0
        n_kernels = {"DWL-OA1": hier.n_nodes, "DWL-OA2": config.k_clusters}.get(config.method, 1)
        check_memory(config.method, n, n_train, n_kernels, config.memory_cap)

        t0 = time.perf_counter()
        if config.method == "WL":
            source = wl_subtree_matrix(hier)
        elif config.method == "WL-OA":
            source = wloa_matrix(hier)
        else:
            k = None if config.method == "DWL-OA1" else config.k_clusters
            source = kernel_family(hier, k, derive_seed(config.seed, 7))
        if isinstance(source, KernelMatrix) and config.normalize:
            source = normalize_unit_diagonal(source)
        timing["kernel"] = time.perf_counter() - t0

        tasks = []
        for r in range(config.repeats):
            for f, (train, test) in enumerate(make_folds(labels, config.folds, derive_seed(config.seed, r), config.stratified)):
                tasks.append((source, labels, train, test, config, derive_seed(config.seed, r, f + 1)))
        t0 = time.perf_counter()
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_fold_task, tasks))
        else:
            results = [run_fold(*t) for t in tasks]
        timing["cross_validation"] = time.perf_counter() - t0
    except (ResourceExhaustedError, MemoryError) as exc:
        report.status = "OOM"
        report.error = str(exc) or "out of memory"
        report.timing = timing
        log.warning("%s on %s: %s", config.method, dataset.name, report.error)
        return report

    table = np.array([res["accuracy"] for res in results]).reshape(config.repeats, config.folds)
    report.accuracy = table.tolist()
    report.mean_accuracy = float(table.mean())
    report.std_dev = float(table.mean(axis=1).std())
    for i, res in enumerate(results):
        r, f = divmod(i, config.folds)
        report.chosen.append({"repeat": r, "fold": f, "C": res["C"], "lambda": res["lambda"],
                              "inner_accuracy": res["inner_accuracy"]})
        if "alpha" in res:
            report.alphas.append(res["alpha"])
            report.mkl.append(dict(res["mkl"], repeat=r, fold=f))
    report.timing = timing
    return report


def _method_order(method: str) -> int:
    return METHODS.index(method) if method in METHODS else len(METHODS)


def _row_label(cfg: MethodConfig) -> str:
    extras = []
    if cfg.h != 4:
        extras.append(f"h={cfg.h}")
    if cfg.method == "DWL-OA2" and cfg.k_clusters != 10:
        extras.append(f"k={cfg.k_clusters}")
    if cfg.normalize:
        extras.append("norm")
    return cfg.method + (f" ({', '.join(extras)})" if extras else "")


def format_cell(report: CVReport) -> str:
    if report.status != "ok":
        return "OOM" if report.status == "OOM" else report.status
    return f"{100 * report.mean_accuracy:.1f}±{100 * report.std_dev:.1f}"


def summarize(reports) -> tuple[str, str]:
    """Render reports as a method-by-dataset table; returns (text, csv)."""
    datasets: list[str] = []
    rows: dict = {}
    order: dict = {}
    for rep in reports:
        if rep.dataset not in datasets:
            datasets.append(rep.dataset)
        label = _row_label(rep.config)
        rows.setdefault(label, {})[rep.dataset] = format_cell(rep)
        order.setdefault(label, (_method_order(rep.config.method), len(order)))
    labels = sorted(rows, key=order.get)
    header = ["Kernel"] + datasets
    body = [[label] + [rows[label].get(ds, "-") for ds in datasets] for label in labels]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))).rstrip()
             for r in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    return "\n".join(lines) + "\n", buf.getvalue()


def write_report(report: CVReport, out_dir: str, include_timing: bool = False) -> dict:
    """Write ``report.json``, per-fold ``report.csv`` and ``table.txt``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "json": os.path.join(out_dir, "report.json"),
        "csv": os.path.join(out_dir, "report.csv"),
        "table": os.path.join(out_dir, "table.txt"),
    }
    with open(paths["json"], "w") as fh:
        json.dump(report.to_dict(include_timing), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(paths["csv"], "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "method", "status", "repeat", "fold", "accuracy", "C", "lambda", "inner_accuracy"])
        if report.status != "ok":
            writer.writerow([report.dataset, report.config.method, report.status, "", "", "", "", "", ""])
        for ch, row in zip(report.chosen, (a for r in report.accuracy for a in r)):
            writer.writerow([report.dataset, report.config.method, report.status, ch["repeat"], ch["fold"],
                             repr(row), ch["C"], "" if ch["lambda"] is None else ch["lambda"], repr(ch["inner_accuracy"])])
    text, _ = summarize([report])
    with open(paths["table"], "w") as fh:
        fh.write(text)
    return paths


def read_report(path: str) -> CVReport:
    with open(path) as fh:
        return CVReport.from_dict(json.load(fh))


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


CONFIG_KEYS = {
    "method": ("method", str),
    "h": ("h", int),
    "k": ("k_clusters", int),
    "k_clusters": ("k_clusters", int),
    "normalize": ("normalize", _bool),
    "c_grid": ("C_grid", _floats),
    "lambda_grid": ("lambda_grid", _floats),
    "seed": ("seed", int),
    "folds": ("folds", int),
    "repeats": ("repeats", int),
    "inner_folds": ("inner_folds", int),
    "stratified": ("stratified", _bool),
    "memory_cap": ("memory_cap", parse_bytes),
}


def read_run_config(path: str) -> tuple[dict, dict]:
    """Parse a ``key = value`` run configuration file.

    Returns ``(run_options, method_options)``; ``run_options`` holds
    ``dataset``, ``name`` and ``node_labels``, ``method_options`` maps to
    :class:`MethodConfig` fields. Unknown keys are rejected.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_string("[run]\n" + fh.read(), source=path)
    run, method = {}, {}
    for key, value in parser["run"].items():
        key = key.replace("-", "_")
        if key in ("dataset", "name"):
            run[key] = value.strip()
        elif key == "node_labels":
            run[key] = _bool(value)
        elif key in CONFIG_KEYS:
            field_name, conv = CONFIG_KEYS[key]
            method[field_name] = conv(value)
        else:
            raise ValueError(f"{path}: unknown configuration key {key!r}")
    return run, method


def config_with(config: MethodConfig, **changes) -> MethodConfig:
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
