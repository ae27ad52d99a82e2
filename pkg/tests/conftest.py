import os

import numpy as np
import pytest

from dwloa.graphs import Graph, GraphDataset, load_tudataset

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def find_dataset(name):
    """Directory containing ``name`` in tests/data or under $DWLOA_DATA, else None."""
    for root in (DATA_DIR, os.environ.get("DWLOA_DATA")):
        if root and os.path.isfile(os.path.join(root, name, f"{name}_A.txt")):
            return os.path.join(root, name)
    return None


def path_graph(n, id=0):
    return Graph.from_edges(id, n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves, id=0):
    return Graph.from_edges(id, leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def cycle_graph(n, id=0):
    return Graph.from_edges(id, n, [(i, (i + 1) % n) for i in range(n)])


def random_graph(rng, n, p=0.4, id=0, n_colors=1):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    colors = rng.integers(n_colors, size=n).tolist()
    return Graph.from_edges(id, n, edges, colors)


def make_dataset(graphs, labels=None, name="toy"):
    graphs = [Graph(i, g.num_vertices, g.adjacency, g.initial_color) for i, g in enumerate(graphs)]
    if labels is None:
        labels = [1 if i % 2 == 0 else -1 for i in range(len(graphs))]
    return GraphDataset(name, tuple(graphs), np.asarray(labels))


def random_dataset(seed, n_graphs=10, max_vertices=7, n_colors=1, p=0.4):
    rng = np.random.default_rng(seed)
    graphs = [random_graph(rng, int(rng.integers(1, max_vertices + 1)), p, i, n_colors) for i in range(n_graphs)]
    return make_dataset(graphs)


@pytest.fixture(scope="session")
def mutag():
    return load_tudataset(os.path.join(DATA_DIR, "MUTAG"), "MUTAG")


@pytest.fixture(scope="session")
def mutag_hier(mutag):
    from dwloa.refinement import refine_colors
    return refine_colors(mutag, 4)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.CRITERIA):
        line = mod.LINES.get(number)
        terminalreporter.write_line(line or f"FAIL  criterion {number:>2}  {mod.CRITERIA[number]}: not run or errored")
