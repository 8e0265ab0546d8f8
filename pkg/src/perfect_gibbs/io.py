"""JSON readers and writers for instance and update files.

Instance file::

    {"q": 3, "n": 3, "edges": [[0, 1], [1, 2]],
     "b": [[1, 1, 1], ...] | "uniform",
     "A": {"default": [[...]], "overrides": [{"edge": [0, 1], "matrix": [[...]]}]}}

Update file::

    {"vertices": [{"v": 0, "b": [...]}], "edges": [{"edge": [0, 1], "matrix": [[...]]}]}

Weights may be JSON numbers or decimal strings; strings load as exact
fractions, which puts the instance in rational mode.
"""

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .graph import Graph
from .spin import NumericMode, SpinSystem


def _read(source):
    if isinstance(source, dict):
        return source
    text = Path(source).read_text() if not str(source).lstrip().startswith("{") else str(source)
    return json.loads(text)


def _weight_out(x):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return float(x)


def _matrix_out(mat):
    return [[_weight_out(x) for x in row] for row in mat]


def load_instance(source, numeric=None) -> SpinSystem:
    """Parse an instance from a path, JSON text, or an already-decoded dict.

    ``numeric`` forces a mode; by default rational iff any weight is a string.
    """
    data = _read(source)
    q = int(data["q"])
    n = int(data["n"])
    graph = Graph(n, [tuple(e) for e in data.get("edges", [])])
    b = data.get("b", "uniform")
    if b == "uniform":
        b = [[1] * q for _ in range(n)]
    a_spec = data["A"]
    if isinstance(a_spec, list):
        a_spec = {"default": a_spec}
    default = a_spec.get("default")
    overrides = {}
    for item in a_spec.get("overrides", []):
        u, v = item["edge"]
        overrides[(min(u, v), max(u, v))] = item["matrix"]
    mats = {}
    for e in graph.edges:
        if e in overrides:
            mats[e] = overrides[e]
        elif default is not None:
            mats[e] = default
        else:
            raise ValueError(f"edge {e} has no matrix and no default is given")
    unknown = set(overrides) - set(graph.edges)
    if unknown:
        raise ValueError(f"override for non-edge {sorted(unknown)[0]}")
    rational = None if numeric is None else NumericMode.parse(numeric) is NumericMode.RATIONAL
    sys = SpinSystem(graph, q, b, mats, rational=rational)
    return sys


def instance_to_dict(sys: SpinSystem) -> dict:
    """Inverse of :func:`load_instance`; every edge is written as an override."""
    return {
        "q": sys.q,
        "n": sys.n,
        "edges": [list(e) for e in sys.graph.edges],
        "b": [[_weight_out(x) for x in row] for row in sys.b],
        "A": {
            "overrides": [
                {"edge": list(e), "matrix": _matrix_out(sys.edge_matrices[k])}
                for k, e in enumerate(sys.graph.edges)
            ]
        },
    }


def save_instance(sys: SpinSystem, path):
    Path(path).write_text(json.dumps(instance_to_dict(sys), indent=1))


def load_update(source):
    """Parse an update file into an :class:`~perfect_gibbs.dynamic.UpdateBatch`."""
    from .dynamic import UpdateBatch
    from .errors import DuplicateEdge, InvalidUpdate

    data = _read(source)
    vertices = {}
    for item in data.get("vertices", []):
        v = int(item["v"])
        if v in vertices:
            raise InvalidUpdate(f"vertex {v} listed twice")
        vertices[v] = item["b"]
    edges = {}
    for item in data.get("edges", []):
        u, v = (int(x) for x in item["edge"])
        key = (min(u, v), max(u, v))
        if key in edges:
            raise DuplicateEdge(f"edge {key} listed twice")
        edges[key] = item["matrix"]
    return UpdateBatch(vertices, edges)


def update_to_dict(update) -> dict:
    return {
        "vertices": [{"v": v, "b": [_weight_out(x) for x in np.asarray(b, dtype=object)]}
                     for v, b in sorted(update.vertices.items())],
        "edges": [{"edge": list(e), "matrix": _matrix_out(np.asarray(m, dtype=object))}
                  for e, m in sorted(update.edges.items())],
    }
