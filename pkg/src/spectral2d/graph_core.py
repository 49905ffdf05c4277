"""Undirected graphs and the symmetric sparse kernels built on them.

Conventions used throughout the package:

* graphs are simple and undirected, nodes are 0-based integers;
* dense matrices are row-major ``float64`` numpy arrays;
* sparse symmetric matrices are stored in CSR form with column indices
  ascending inside each row, which fixes the summation order of every
  sparse product and makes results bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph.

    ``edges`` holds canonical ``(min, max)`` pairs sorted lexicographically.
    Self-loops, duplicate edges and out-of-range endpoints are rejected.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"graph needs at least one node, got {self.n_nodes}")
        canon = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop ({u},{v}) is not allowed")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(
                    f"edge ({u},{v}) out of range for {self.n_nodes} nodes"
                )
            canon.append((u, v) if u < v else (v, u))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a == b:
                raise ValueError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(canon))

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class SparseSym:
    """Structurally symmetric sparse matrix in CSR form.

    ``col_indices`` are strictly ascending within each row; ``values`` are
    finite float64. The pattern always mirrors across the diagonal.
    """

    dim: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def row_of_entry(self) -> np.ndarray:
        """Row index of each stored entry, in storage order."""
        counts = np.diff(self.row_offsets)
        return np.repeat(np.arange(self.dim, dtype=np.int64), counts)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        if self.nnz:
            out[self.row_of_entry(), self.col_indices] = self.values
        return out


def _csr_from_coo(n: int, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> SparseSym:
    # entries are assumed unique per (row, col); sort row-major, column ascending
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    counts = np.bincount(rows, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return SparseSym(
        dim=n,
        row_offsets=offsets,
        col_indices=cols.astype(np.int64),
        values=np.asarray(vals, dtype=np.float64),
    )


def degree_vector(g: Graph) -> np.ndarray:
    """Number of incident edges per node, as a float64 vector of length N."""
    deg = np.zeros(g.n_nodes)
    for u, v in g.edges:
        deg[u] += 1.0
        deg[v] += 1.0
    return deg


def adjacency(g: Graph) -> SparseSym:
    """Binary adjacency matrix of the graph."""
    if not g.edges:
        empty = np.zeros(0, dtype=np.int64)
        return _csr_from_coo(g.n_nodes, empty, empty, np.zeros(0))
    e = np.asarray(g.edges, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return _csr_from_coo(g.n_nodes, rows, cols, np.ones(rows.size))


def normalized_laplacian(g: Graph) -> SparseSym:
    """Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}.

    Every node keeps a stored diagonal entry of value 1; a node with no
    incident edges therefore contributes the row e_i. The spectrum lies in
    [0, 2] for any simple undirected graph.
    """
    deg = degree_vector(g)
    inv_sqrt = np.zeros(g.n_nodes)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])

    rows = [np.arange(g.n_nodes, dtype=np.int64)]
    cols = [np.arange(g.n_nodes, dtype=np.int64)]
    vals = [np.ones(g.n_nodes)]
    if g.edges:
        e = np.asarray(g.edges, dtype=np.int64)
        w = -inv_sqrt[e[:, 0]] * inv_sqrt[e[:, 1]]
        rows.append(np.concatenate([e[:, 0], e[:, 1]]))
        cols.append(np.concatenate([e[:, 1], e[:, 0]]))
        vals.append(np.concatenate([w, w]))
    return _csr_from_coo(
        g.n_nodes, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


def shifted_laplacian(lap: SparseSym) -> SparseSym:
    """Subtract the identity: L - I, moving the spectrum into [-1, 1].

    Requires every row of ``lap`` to carry a stored diagonal entry, which
    ``normalized_laplacian`` guarantees.
    """
    rows = lap.row_of_entry()
    diag_mask = rows == lap.col_indices
    per_row = np.bincount(rows[diag_mask], minlength=lap.dim) if lap.nnz else np.zeros(lap.dim, dtype=np.int64)
    missing = np.nonzero(per_row == 0)[0]
    if missing.size:
        raise ValueError(f"row {int(missing[0])} has no stored diagonal entry")
    values = lap.values.copy()
    values[diag_mask] -= 1.0
    return SparseSym(
        dim=lap.dim,
        row_offsets=lap.row_offsets.copy(),
        col_indices=lap.col_indices.copy(),
        values=values,
    )


def spmm(m: SparseSym, x: np.ndarray) -> np.ndarray:
    """Sparse-symmetric times dense product M @ X.

    Summation within each output entry runs over ascending column index,
    so repeated calls on identical inputs are bit-identical. Accepts a
    vector or an (N, C) matrix and returns the same rank.
    """
    x = np.asarray(x, dtype=np.float64)
    vector_in = x.ndim == 1
    if vector_in:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != m.dim:
        raise ValueError(f"shape mismatch: matrix is {m.dim}x{m.dim}, operand is {x.shape}")
    out = np.zeros((m.dim, x.shape[1]))
    if m.nnz:
        contrib = m.values[:, None] * x[m.col_indices]
        starts = m.row_offsets[:-1]
        nonempty = starts < m.row_offsets[1:]
        out[nonempty] = np.add.reduceat(contrib, starts[nonempty], axis=0)
    return out[:, 0] if vector_in else out
