"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from spectral2d.graph_core import Graph, normalized_laplacian
from spectral2d.spectral import EigenBasis, eig_sym


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4) -> Graph:
    """Erdos-Renyi draw with a ring added so no node is isolated."""
    edges = {(i, (i + 1) % n) if i < (i + 1) % n else ((i + 1) % n, i) for i in range(n)}
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < p
    for u, v in zip(iu[hit], ju[hit]):
        edges.add((int(u), int(v)))
    return Graph(n, tuple(sorted(edges)))


def laplacian_basis(g: Graph) -> EigenBasis:
    return eig_sym(normalized_laplacian(g).to_dense())


def identity_basis(n: int) -> EigenBasis:
    return EigenBasis(u=np.eye(n), lam=np.zeros(n))
