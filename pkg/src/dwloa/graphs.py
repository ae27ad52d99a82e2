"""Graph data model and TUDataset ingestion."""
from __future__ import annotations

import os
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DatasetFormatError, DatasetLoadError, UnsupportedDatasetError


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with 0-based contiguous vertex ids.

    ``adjacency[v]`` is the sorted tuple of neighbours of ``v``;
    ``initial_color[v]`` is a non-negative integer color.
    """

    id: int
    num_vertices: int
    adjacency: tuple[tuple[int, ...], ...]
    initial_color: tuple[int, ...]

    def __post_init__(self):
        if len(self.adjacency) != self.num_vertices:
            raise DatasetFormatError(f"graph {self.id}: adjacency has {len(self.adjacency)} rows, expected {self.num_vertices}")
        if len(self.initial_color) != self.num_vertices:
            raise DatasetFormatError(f"graph {self.id}: {len(self.initial_color)} colors for {self.num_vertices} vertices")

    @classmethod
    def from_edges(cls, id: int, num_vertices: int, edges, initial_color=None) -> "Graph":
        """Build a graph from an iterable of (u, v) pairs; duplicates collapse."""
        nbrs: list[set[int]] = [set() for _ in range(num_vertices)]
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise DatasetFormatError(f"graph {id}: self-loop at vertex {u}")
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise DatasetFormatError(f"graph {id}: edge ({u}, {v}) out of range for {num_vertices} vertices")
            nbrs[u].add(v)
            nbrs[v].add(u)
        if initial_color is None:
            initial_color = (0,) * num_vertices
        return cls(id, num_vertices, tuple(tuple(sorted(s)) for s in nbrs), tuple(int(c) for c in initial_color))

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self):
        """Yield each undirected edge once as (u, v) with u < v."""
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u < v:
                    yield u, v

    def relabeled(self, perm: Sequence[int]) -> "Graph":
        """Return an isomorphic copy where old vertex ``v`` becomes ``perm[v]``."""
        perm = list(perm)
        colors = [0] * self.num_vertices
        for v, c in enumerate(self.initial_color):
            colors[perm[v]] = c
        return Graph.from_edges(self.id, self.num_vertices, ((perm[u], perm[v]) for u, v in self.edges()), colors)


@dataclass(frozen=True)
class GraphDataset:
    name: str
    graphs: tuple[Graph, ...]
    class_label: np.ndarray  # values in {-1, +1}
    original_labels: tuple[str, str] = field(default=("-1", "1"))

    def __post_init__(self):
        labels = np.asarray(self.class_label, dtype=np.int64)
        if labels.shape != (len(self.graphs),):
            raise DatasetFormatError(f"{self.name}: {labels.size} class labels for {len(self.graphs)} graphs")
        if set(np.unique(labels).tolist()) != {-1, 1}:
            raise UnsupportedDatasetError(f"{self.name}: class labels must be exactly {{-1, +1}}, got {sorted(set(labels.tolist()))}")
        labels.setflags(write=False)
        object.__setattr__(self, "class_label", labels)
        object.__setattr__(self, "graphs", tuple(self.graphs))

    def __len__(self):
        return len(self.graphs)

    @property
    def total_vertices(self) -> int:
        return sum(g.num_vertices for g in self.graphs)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.num_vertices for g in self.graphs], dtype=np.int64)

    def subset(self, index) -> "GraphDataset":
        index = list(index)
        graphs = [self.graphs[i] for i in index]
        graphs = [Graph(j, g.num_vertices, g.adjacency, g.initial_color) for j, g in enumerate(graphs)]
        return GraphDataset(self.name, tuple(graphs), self.class_label[index], self.original_labels)


def _read_int_table(path: str, ncols: int) -> np.ndarray:
    if not os.path.isfile(path):
        raise DatasetLoadError(f"missing dataset file: {path}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # empty files
        try:
            data = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: {exc}") from exc
    if data.size == 0:
        return np.zeros((0, ncols), dtype=np.int64)
    if data.shape[1] != ncols:
        raise DatasetFormatError(f"{path}: expected {ncols} column(s), found {data.shape[1]}")
    return data


def _read_lines(path: str) -> list[str]:
    if not os.path.isfile(path):
        raise DatasetLoadError(f"missing dataset file: {path}")
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def load_tudataset(directory: str, dataset_name: str, use_node_labels: bool = False) -> GraphDataset:
    """Load a binary graph classification dataset in TUDataset text format.

    Vertex ids in the files are global and 1-based; the returned graphs use
    per-graph 0-based ids. Class labels are remapped so that the smaller
    original label becomes -1. With ``use_node_labels=False`` every vertex
    gets initial color 0.
    """
    prefix = os.path.join(directory, dataset_name)
    indicator = _read_int_table(f"{prefix}_graph_indicator.txt", 1)[:, 0]
    edges = _read_int_table(f"{prefix}_A.txt", 2)
    raw_labels = _read_lines(f"{prefix}_graph_labels.txt")

    n_graphs = len(raw_labels)
    n_total = indicator.size
    if n_total and (indicator.min() < 1 or np.any(np.diff(indicator) < 0)):
        raise DatasetFormatError(f"{prefix}_graph_indicator.txt: vertices of a graph are not contiguous")
    present = np.unique(indicator)
    if present.size != n_graphs or (n_graphs and not np.array_equal(present, np.arange(1, n_graphs + 1))):
        raise DatasetFormatError(
            f"{prefix}_graph_indicator.txt: graph ids must be 1..{n_graphs} (one per label line), "
            f"found {present.size} distinct ids"
        )

    distinct = sorted(set(raw_labels), key=_label_sort_key)
    if len(distinct) != 2:
        raise UnsupportedDatasetError(f"{dataset_name}: expected exactly 2 class labels, found {len(distinct)}: {distinct[:10]}")
    remap = {distinct[0]: -1, distinct[1]: 1}
    labels = np.array([remap[x] for x in raw_labels], dtype=np.int64)

    if use_node_labels:
        node_raw = _read_lines(f"{prefix}_node_labels.txt")
        if len(node_raw) != n_total:
            raise DatasetFormatError(f"{prefix}_node_labels.txt: {len(node_raw)} lines for {n_total} vertices")
        palette = {lab: i for i, lab in enumerate(sorted(set(node_raw), key=_label_sort_key))}
        node_colors = np.array([palette[x] for x in node_raw], dtype=np.int64)
    else:
        node_colors = np.zeros(n_total, dtype=np.int64)

    # first global vertex id (0-based) of every graph
    starts = np.searchsorted(indicator, np.arange(1, n_graphs + 2))
    if edges.size:
        if edges.min() < 1 or edges.max() > n_total:
            raise DatasetFormatError(f"{prefix}_A.txt: vertex id out of range 1..{n_total}")
        e = edges - 1
        g_of = indicator[e] - 1
        if np.any(g_of[:, 0] != g_of[:, 1]):
            bad = int(np.flatnonzero(g_of[:, 0] != g_of[:, 1])[0])
            raise DatasetFormatError(f"{prefix}_A.txt: line {bad + 1} connects vertices of different graphs")
        loops = np.flatnonzero(e[:, 0] == e[:, 1])
        if loops.size:
            raise DatasetFormatError(f"{prefix}_A.txt: self-loop on line {int(loops[0]) + 1} (vertex {int(edges[loops[0], 0])})")
        order = np.argsort(g_of[:, 0], kind="stable")
        e, g_edge = e[order], g_of[order, 0]
        edge_bounds = np.searchsorted(g_edge, np.arange(n_graphs + 1))
    else:
        e = np.zeros((0, 2), dtype=np.int64)
        edge_bounds = np.zeros(n_graphs + 1, dtype=np.int64)

    graphs = []
    for g in range(n_graphs):
        lo, hi = int(starts[g]), int(starts[g + 1])
        local = e[edge_bounds[g]:edge_bounds[g + 1]] - lo
        graphs.append(Graph.from_edges(g, hi - lo, local.tolist(), node_colors[lo:hi].tolist()))
    return GraphDataset(dataset_name, tuple(graphs), labels, (distinct[0], distinct[1]))


def write_tudataset(dataset: GraphDataset, directory: str, dataset_name: str | None = None) -> None:
    """Write ``dataset`` in TUDataset format; the inverse of :func:`load_tudataset`.

    Both edge directions are written. Node labels are the initial colors;
    graph labels are the original labels.
    """
    name = dataset_name or dataset.name
    os.makedirs(directory, exist_ok=True)
    prefix = os.path.join(directory, name)
    offset = 0
    with open(f"{prefix}_A.txt", "w") as fa, open(f"{prefix}_graph_indicator.txt", "w") as fi, \
            open(f"{prefix}_node_labels.txt", "w") as fn:
        for g_idx, g in enumerate(dataset.graphs):
            for v, nbrs in enumerate(g.adjacency):
                for u in nbrs:
                    fa.write(f"{v + offset + 1}, {u + offset + 1}\n")
            for v in range(g.num_vertices):
                fi.write(f"{g_idx + 1}\n")
                fn.write(f"{g.initial_color[v]}\n")
            offset += g.num_vertices
    back = {-1: dataset.original_labels[0], 1: dataset.original_labels[1]}
    with open(f"{prefix}_graph_labels.txt", "w") as fl:
        for y in dataset.class_label:
            fl.write(f"{back[int(y)]}\n")


@dataclass(frozen=True)
class DatasetStats:
    name: str
    num_graphs: int
    class_counts: dict
    total_vertices: int
    total_edges: int
    min_vertices: int
    max_vertices: int
    mean_vertices: float
    mean_edges: float
    degree_histogram: dict

    def format(self) -> str:
        lines = [
            f"dataset          {self.name}",
            f"graphs           {self.num_graphs}",
            f"class -1 / +1    {self.class_counts[-1]} / {self.class_counts[1]}",
            f"vertices         {self.total_vertices} (min {self.min_vertices}, max {self.max_vertices}, mean {self.mean_vertices:.2f})",
            f"edges            {self.total_edges} (mean {self.mean_edges:.2f})",
            "degree histogram " + " ".join(f"{d}:{c}" for d, c in sorted(self.degree_histogram.items())),
        ]
        return "\n".join(lines)


def dataset_stats(dataset) -> DatasetStats:
    """Summary counts for a :class:`GraphDataset` or a plain sequence of graphs."""
    if isinstance(dataset, GraphDataset):
        name, graphs, labels = dataset.name, dataset.graphs, dataset.class_label
    else:
        name, graphs, labels = "graphs", tuple(dataset), np.zeros(0, dtype=np.int64)
    sizes = [g.num_vertices for g in graphs]
    n_edges = [g.num_edges for g in graphs]
    degrees = Counter(len(nbrs) for g in graphs for nbrs in g.adjacency)
    n = len(graphs)
    return DatasetStats(
        name=name,
        num_graphs=n,
        class_counts={-1: int(np.sum(labels == -1)), 1: int(np.sum(labels == 1))},
        total_vertices=sum(sizes),
        total_edges=sum(n_edges),
        min_vertices=min(sizes) if sizes else 0,
        max_vertices=max(sizes) if sizes else 0,
        mean_vertices=sum(sizes) / n if n else 0.0,
        mean_edges=sum(n_edges) / n if n else 0.0,
        degree_histogram=dict(sorted(degrees.items())),
    )
