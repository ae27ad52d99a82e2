"""Weisfeiler-Lehman color refinement and the resulting color hierarchy.

Colors are refined jointly over all graphs of a dataset with one injective
signature table, so a color id means the same thing in every graph. Each
(level, color) pair is a node of a rooted tree: its parent is the color the
same vertices had one level earlier, and level-0 colors hang below a
synthetic root. Nodes are numbered globally, level by level.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .graphs import GraphDataset

ROOT = -1


@dataclass(frozen=True)
class ColorHierarchy:
    """Refinement result for a dataset.

    Attributes
    ----------
    h : int
        Number of refinement iterations; levels are ``0..h``.
    graph_offsets : ndarray, shape (n_graphs + 1,)
        Vertex ``v`` of graph ``g`` has flat index ``graph_offsets[g] + v``.
    colors : tuple of ndarray
        ``colors[i][flat]`` is the level-local color id at iteration ``i``.
    level_offsets : ndarray, shape (h + 2,)
        Node id of color ``c`` at level ``i`` is ``level_offsets[i] + c``.
    parent : ndarray, shape (n_nodes,)
        Parent node id; level-0 nodes point to ``ROOT``.
    counts : scipy.sparse.csr_matrix, shape (n_nodes, n_graphs)
        Number of vertices of each graph holding each node's color.
    weights : ndarray, shape (n_nodes,)
        Non-negative node weights.
    root_weight : float
        Weight of the synthetic root.
    """

    h: int
    graph_offsets: np.ndarray
    colors: tuple
    level_offsets: np.ndarray
    parent: np.ndarray
    counts: sp.csr_matrix
    weights: np.ndarray
    root_weight: float = 0

    @property
    def n_graphs(self) -> int:
        return self.graph_offsets.size - 1

    @property
    def n_nodes(self) -> int:
        return int(self.level_offsets[-1])

    @property
    def graph_sizes(self) -> np.ndarray:
        return np.diff(self.graph_offsets)

    @cached_property
    def level(self) -> np.ndarray:
        """Level of every node."""
        return np.repeat(np.arange(self.h + 1), np.diff(self.level_offsets))

    def level_nodes(self, i: int) -> range:
        return range(int(self.level_offsets[i]), int(self.level_offsets[i + 1]))

    def n_colors(self, i: int) -> int:
        return int(self.level_offsets[i + 1] - self.level_offsets[i])

    def flat_index(self, g: int, v: int) -> int:
        if not 0 <= g < self.n_graphs:
            raise IndexError(f"graph {g} out of range for {self.n_graphs} graphs")
        size = int(self.graph_offsets[g + 1] - self.graph_offsets[g])
        if not 0 <= v < size:
            raise IndexError(f"vertex {v} out of range for graph {g} with {size} vertices")
        return int(self.graph_offsets[g]) + v

    def color_of(self, i: int, g: int, v: int) -> int:
        return int(self.colors[i][self.flat_index(g, v)])

    def node_of(self, i: int, g: int, v: int) -> int:
        return int(self.level_offsets[i]) + self.color_of(i, g, v)

    def count(self, node: int, g: int) -> int:
        return int(self.counts[node, g])

    def vertex_nodes(self, flat) -> np.ndarray:
        """Node ids on the path of each flat vertex, shape (h + 1, len(flat))."""
        flat = np.asarray(flat, dtype=np.int64)
        return np.stack([self.colors[i][flat] + self.level_offsets[i] for i in range(self.h + 1)])

    def with_weights(self, weights, root_weight=0) -> "ColorHierarchy":
        """Copy of the hierarchy carrying new node weights."""
        weights = np.asarray(weights)
        if weights.shape != (self.n_nodes,):
            raise ValueError(f"expected {self.n_nodes} weights, got shape {weights.shape}")
        if np.any(weights < 0) or root_weight < 0:
            raise ValueError("hierarchy weights must be non-negative")
        new = dataclasses.replace(self, weights=weights, root_weight=root_weight)
        for key in ("level", "unary"):
            if key in self.__dict__:
                new.__dict__[key] = self.__dict__[key]
        return new

    @cached_property
    def unary(self) -> "UnaryExpansion":
        return UnaryExpansion.from_counts(self.counts)

    def canonical_form(self):
        """Color-id independent description used to compare refinements."""
        dense = self.counts.toarray()
        return tuple(
            tuple(sorted(map(tuple, dense[self.level_offsets[i]:self.level_offsets[i + 1]].tolist())))
            for i in range(self.h + 1)
        )

    def dump(self, fh) -> None:
        """Write one row per node: level, color, node, parent, weight, graph:count pairs."""
        fh.write(f"# h={self.h} nodes={self.n_nodes} graphs={self.n_graphs} root_weight={self.root_weight}\n")
        fh.write("level\tcolor\tnode\tparent\tweight\tcounts\n")
        counts = self.counts
        for node in range(self.n_nodes):
            lvl = int(self.level[node])
            lo, hi = counts.indptr[node], counts.indptr[node + 1]
            pairs = " ".join(f"{g}:{c}" for g, c in zip(counts.indices[lo:hi], counts.data[lo:hi]))
            fh.write(f"{lvl}\t{node - int(self.level_offsets[lvl])}\t{node}\t{int(self.parent[node])}\t{self.weights[node]}\t{pairs}\n")


@dataclass(frozen=True)
class UnaryExpansion:
    """Binary matrix ``E`` with ``min(c_vg, c_vh) = sum_t E[(v,t), g] * E[(v,t), h]``.

    Row ``(v, t)`` for ``t = 1..max_g c_vg`` has a one in column ``g`` iff
    ``c_vg >= t``, so per-node min kernels become sums of rank-one terms and
    every weighted histogram intersection is ``E.T @ diag(w[row_node]) @ E``.
    """

    matrix: sp.csr_matrix
    row_node: np.ndarray

    @classmethod
    def from_counts(cls, counts: sp.csr_matrix) -> "UnaryExpansion":
        counts = counts.tocsr()
        n_nodes, n_graphs = counts.shape
        depth = np.zeros(n_nodes, dtype=np.int64)
        nz_rows = np.repeat(np.arange(n_nodes), np.diff(counts.indptr))
        np.maximum.at(depth, nz_rows, counts.data)
        row_start = np.concatenate([[0], np.cumsum(depth)])
        # each stored count c at (v, g) yields ones in rows row_start[v] .. row_start[v] + c - 1
        data = counts.data.astype(np.int64)
        rows = np.repeat(row_start[nz_rows], data) + _ragged_arange(data)
        cols = np.repeat(counts.indices, data)
        mat = sp.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(int(row_start[-1]), n_graphs))
        return cls(mat, np.repeat(np.arange(n_nodes), depth))


def _ragged_arange(lengths: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(n)`` for every ``n`` in ``lengths``."""
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.cumsum(lengths) - lengths
    return np.arange(total, dtype=np.int64) - np.repeat(starts, lengths)


def refine_colors(dataset: GraphDataset, h: int) -> ColorHierarchy:
    """Run ``h`` rounds of color refinement jointly over ``dataset``.

    A new color is the image of (own color, sorted neighbour colors) under a
    dictionary that assigns fresh ids in scan order. All ``h + 1`` levels
    are kept even if the partition stabilises early. Weights start at 1,
    the root weight at 0.
    """
    if h < 0:
        raise ValueError("h must be non-negative")
    graphs = dataset.graphs
    sizes = np.array([g.num_vertices for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n_total = int(offsets[-1])
    # global adjacency lists over flat vertex ids
    nbrs = []
    for g, off in zip(graphs, offsets[:-1].tolist()):
        nbrs.extend([off + u for u in adj] for adj in g.adjacency)
    graph_of = np.repeat(np.arange(len(graphs)), sizes)

    table: dict = {}
    level0 = np.empty(n_total, dtype=np.int64)
    flat = 0
    for g in graphs:
        for c in g.initial_color:
            level0[flat] = table.setdefault(c, len(table))
            flat += 1
    colors = [level0]
    n_colors = [len(table)]
    parents = [np.full(len(table), ROOT, dtype=np.int64)]

    for i in range(1, h + 1):
        prev = colors[-1].tolist()
        table = {}
        new = np.empty(n_total, dtype=np.int64)
        parent_color = []
        for v in range(n_total):
            sig = (prev[v], tuple(sorted([prev[u] for u in nbrs[v]])))
            c = table.get(sig)
            if c is None:
                c = table[sig] = len(table)
                parent_color.append(prev[v])
            new[v] = c
        colors.append(new)
        n_colors.append(len(table))
        # offset of level i-1 = sum of color counts on levels < i-1
        parents.append(np.asarray(parent_color, dtype=np.int64) + sum(n_colors[:i - 1]))

    level_offsets = np.concatenate([[0], np.cumsum(n_colors)]).astype(np.int64)
    node_rows = np.concatenate([colors[i] + level_offsets[i] for i in range(h + 1)])
    node_cols = np.tile(graph_of, h + 1)
    counts = sp.csr_matrix(
        (np.ones(node_rows.size, dtype=np.int64), (node_rows, node_cols)),
        shape=(int(level_offsets[-1]), len(graphs)),
    )
    counts.sum_duplicates()
    counts.sort_indices()
    for arr in colors:
        arr.setflags(write=False)
    n_nodes = int(level_offsets[-1])
    return ColorHierarchy(
        h=h,
        graph_offsets=offsets,
        colors=tuple(colors),
        level_offsets=level_offsets,
        parent=np.concatenate(parents),
        counts=counts,
        weights=np.ones(n_nodes, dtype=np.int64),
        root_weight=0,
    )


def vertex_similarity(hier: ColorHierarchy, x: tuple[int, int], y: tuple[int, int]):
    """Weighted Dirac similarity of two vertices given as (graph, vertex) pairs.

    Sums the weights of all colors the vertices share, plus the root weight.
    With unit weights and a zero root this counts the levels on which the
    two vertices agree.
    """
    fx = hier.flat_index(*x)
    fy = hier.flat_index(*y)
    total = hier.root_weight
    for i in range(hier.h + 1):
        if hier.colors[i][fx] == hier.colors[i][fy]:
            total = total + hier.weights[hier.level_offsets[i] + hier.colors[i][fx]]
    return total


def similarity_matrix(hier: ColorHierarchy, flat_a, flat_b) -> np.ndarray:
    """Vertex similarities between two lists of flat vertex indices."""
    na = hier.vertex_nodes(flat_a)
    nb = hier.vertex_nodes(flat_b)
    out = np.zeros((na.shape[1], nb.shape[1]), dtype=np.result_type(hier.weights, type(hier.root_weight)))
    out += hier.root_weight
    for i in range(hier.h + 1):
        same = na[i][:, None] == nb[i][None, :]
        out += np.where(same, hier.weights[na[i]][:, None], 0)
    return out


def graph_vertices(hier: ColorHierarchy, g: int) -> np.ndarray:
    return np.arange(hier.graph_offsets[g], hier.graph_offsets[g + 1])
