"""Shipped graph fixtures.

``geo20`` is a 20-node random geometric graph (unit square, link radius 0.4,
generator seed 334) with algebraic connectivity about 0.85. ``geo20-dense``
uses the same node positions with radius 0.455, a supergraph with algebraic
connectivity about 1.53, meant as the better-connected communication graph.
Both are stored as edge lists; :func:`regenerate` rebuilds them.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .graph_core import COMMUNICATION, PROCESSING, Graph, build_graph, geometric_adjacency, \
    load_edge_list, random_geometric_graph, save_edge_list

GEO20_SEED = 334
GEO20_RADIUS = 0.4
GEO20_DENSE_RADIUS = 0.455

FIXTURES = {
    "geo20": "geo20.txt",
    "geo20-dense": "geo20_dense.txt",
}


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}")
    return Path(str(resources.files("diffgsp") / "data" / FIXTURES[name]))


def load_fixture(name: str, role: str = PROCESSING) -> Graph:
    return load_edge_list(fixture_path(name), role=role)


def regenerate(directory) -> dict:
    """Rebuild the fixture files in ``directory``; returns name -> path."""
    directory = Path(directory)
    g, pos = random_geometric_graph(20, GEO20_RADIUS, GEO20_SEED)
    dense = build_graph(geometric_adjacency(pos, GEO20_DENSE_RADIUS), COMMUNICATION)
    out = {}
    for name, graph, radius in (("geo20", g, GEO20_RADIUS), ("geo20-dense", dense, GEO20_DENSE_RADIUS)):
        path = directory / FIXTURES[name]
        header = (f"random geometric graph, 20 nodes in the unit square, seed {GEO20_SEED}, "
                  f"radius {radius}")
        save_edge_list(graph, path, header=header)
        out[name] = path
    return out
