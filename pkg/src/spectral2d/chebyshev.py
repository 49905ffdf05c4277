"""Chebyshev polynomial machinery for graph filtering.

Nodes, the classical interpolation coefficient map, matrix-polynomial
recurrences against sparse operators, and the streamlined 2-D convolution
that contracts a coefficient tensor into per-order mixing matrices. The
conventional 2/(D+1) prefactor of the interpolation formula is folded into
the coefficient tensor throughout: it is a reparameterization the learnable
path absorbs for free, and using one convention everywhere keeps the
cross-form checks honest.
"""

from __future__ import annotations

import numpy as np

from .graph_core import SparseSym, spmm


def cheb_nodes(degree: int) -> np.ndarray:
    """Interpolation nodes x_b = cos((b + 1/2)pi / (degree + 1)), b = 0..degree.

    These are the degree+1 zeros of the next Chebyshev polynomial
    T_{degree+1}; the denominator is the node count, which is what makes
    them roots. Strictly decreasing, all inside (-1, 1).
    """
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    b = np.arange(degree + 1, dtype=np.float64)
    return np.cos((b + 0.5) * np.pi / (degree + 1))


def cheb_eval(order: int, x):
    """T_order(x) by the recurrence T_0 = 1, T_1 = x, T_{d+1} = 2x T_d - T_{d-1}.

    Accepts a scalar or an ndarray; returns the matching shape.
    """
    if order < 0:
        raise ValueError(f"order must be non-negative, got {order}")
    arr = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(arr)
    if order == 0:
        return float(prev) if arr.ndim == 0 else prev
    cur = arr.copy()
    for _ in range(order - 1):
        prev, cur = cur, 2.0 * arr * cur - prev
    return float(cur) if arr.ndim == 0 else cur


def _cheb_matrix(degree: int) -> np.ndarray:
    """Values T_d(x_b) on the canonical nodes: shape (degree+1, degree+1),
    row d, column b."""
    nodes = cheb_nodes(degree)
    tmat = np.empty((degree + 1, degree + 1))
    tmat[0] = 1.0
    if degree >= 1:
        tmat[1] = nodes
    for d in range(2, degree + 1):
        tmat[d] = 2.0 * nodes * tmat[d - 1] - tmat[d - 2]
    return tmat


def interpolate(samples: np.ndarray, degree: int | None = None) -> np.ndarray:
    """Classical coefficient map from node samples to Chebyshev coefficients.

    Given g(x_b) at the canonical nodes of ``cheb_nodes(D)`` this returns
    theta with theta_d = (2/(D+1)) sum_b g(x_b) T_d(x_b) and the d=0 entry
    halved, so that sum_d theta_d T_d reproduces the samples at every node.
    For a polynomial g of degree at most D the reproduction is exact on all
    of [-1, 1], not just at the nodes.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError(f"samples must be a non-empty vector, got shape {samples.shape}")
    d = samples.size - 1
    if degree is not None and degree != d:
        raise ValueError(f"expected {degree + 1} samples for degree {degree}, got {samples.size}")
    theta = (2.0 / (d + 1)) * (_cheb_matrix(d) @ samples)
    theta[0] *= 0.5
    return theta


def cheb_basis_mats(lhat: SparseSym, f: np.ndarray, d_max: int) -> list[np.ndarray]:
    """[T_0(Lhat) F, ..., T_{d_max}(Lhat) F] by the matrix recurrence.

    B_0 = F, B_1 = Lhat F, B_{d+1} = 2 Lhat B_d - B_{d-1}. The polynomial of
    the operator is never materialized; each step is one sparse product
    against the tall signal matrix.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != lhat.dim:
        raise ValueError(f"signal has {f.shape[0]} rows, operator has dimension {lhat.dim}")
    if d_max < 0:
        raise ValueError(f"d_max must be non-negative, got {d_max}")
    mats = [f]
    if d_max >= 1:
        mats.append(spmm(lhat, f))
    for _ in range(2, d_max + 1):
        mats.append(2.0 * spmm(lhat, mats[-1]) - mats[-2])
    return mats


def conv2d_cheb(lhat: SparseSym, f: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Convolution Z = sum_d T_d(Lhat) F M_d with M_d = sum_b T_d(x_b) Theta[:, :, b].

    ``theta`` has shape (C, J, D+1); entry (c, j, b) couples input channel c
    to output channel j through the sample at node b. The C x J mixing
    matrices M_d are contracted once up front, then the d-sum runs in
    ascending order. Because the classical 2/(D+1) prefactor lives inside
    Theta, the identity tensor (Theta[:, :, b] = I for every b) maps F to
    (D+1) F: the node sums kill every order except d = 0.
    """
    f = np.asarray(f, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError(f"signal must be 2-D, got shape {f.shape}")
    if theta.ndim != 3:
        raise ValueError(f"coefficient tensor must be 3-D, got shape {theta.shape}")
    if theta.shape[0] != f.shape[1]:
        raise ValueError(
            f"tensor couples {theta.shape[0]} input channels, signal has {f.shape[1]}"
        )
    degree = theta.shape[2] - 1
    # mixers[d] = M_d, shape (D+1, C, J)
    mixers = np.tensordot(_cheb_matrix(degree), theta, axes=([1], [2]))
    mats = cheb_basis_mats(lhat, f, degree)
    out = np.zeros((f.shape[0], theta.shape[1]))
    for d in range(degree + 1):
        out += mats[d] @ mixers[d]
    return out


def grid_from_theta(theta: np.ndarray, lambda_hat: np.ndarray) -> np.ndarray:
    """Filter grid a coefficient tensor induces on a known spectrum.

    grid[c, j, n] = sum_d M_d[c, j] T_d(lambda_hat[n]) with the same mixing
    matrices as ``conv2d_cheb``. Verification-only companion: it lets the
    recurrence path be compared against the explicit spectral path.
    """
    theta = np.asarray(theta, dtype=np.float64)
    lam = np.asarray(lambda_hat, dtype=np.float64)
    if theta.ndim != 3:
        raise ValueError(f"coefficient tensor must be 3-D, got shape {theta.shape}")
    if lam.ndim != 1:
        raise ValueError(f"spectrum must be a vector, got shape {lam.shape}")
    degree = theta.shape[2] - 1
    mixers = np.tensordot(_cheb_matrix(degree), theta, axes=([1], [2]))
    pvals = np.empty((degree + 1, lam.size))
    pvals[0] = 1.0
    if degree >= 1:
        pvals[1] = lam
    for d in range(2, degree + 1):
        pvals[d] = 2.0 * lam * pvals[d - 1] - pvals[d - 2]
    return np.tensordot(mixers, pvals, axes=([0], [0]))
