"""Eigendecomposition and the graph Fourier transform.

The eigensolver is a cyclic Jacobi iteration written out in full rather than
a LAPACK call: the fixed sweep order, the explicit sign convention and
single-threaded execution make identical input bits produce identical output
bits on every run, which the rest of the package relies on for reproducible
artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EigenBasis:
    """Orthonormal eigenbasis of a symmetric matrix.

    ``u`` holds eigenvectors in columns, ``lam`` the matching eigenvalues in
    ascending order. In each column the first entry of magnitude above 1e-12
    is positive.
    """

    u: np.ndarray
    lam: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.lam.size)


def _round_robin_schedule(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Fixed tournament schedule covering every index pair once per sweep.

    Each round pairs up disjoint planes, so all rotations of a round can be
    applied as one orthogonal transform without touching each other's target
    entries. The schedule depends only on ``n``; the sweep order is the same
    on every call.
    """
    m = n if n % 2 == 0 else n + 1  # odd n gets a dummy player
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        arr = [0] + others
        ps, qs = [], []
        for i in range(m // 2):
            a, b = arr[i], arr[m - 1 - i]
            if a >= n or b >= n:
                continue
            ps.append(min(a, b))
            qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=np.int64), np.array(qs, dtype=np.int64)))
        others = others[1:] + others[:1]
    return rounds


def eig_sym(m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> EigenBasis:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotation planes are visited in the fixed round-robin order from
    ``_round_robin_schedule`` until the off-diagonal Frobenius norm drops
    below ``tol``. Raises ``ValueError`` for non-square or non-symmetric
    input and ``RuntimeError`` if the iteration has not converged after
    ``max_sweeps`` full sweeps.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > 1 and np.abs(a - a.T).max() > 1e-12:
        raise ValueError("matrix is not symmetric to 1e-12")

    b = a.copy()
    vt = np.eye(n)  # rows accumulate eigenvector components
    if n == 1:
        return EigenBasis(u=vt, lam=b.diagonal().copy())

    def _off2() -> float:
        # summed from the off-diagonal entries themselves; forming
        # ||B||^2 - sum(diag^2) instead cancels catastrophically
        sq = b * b
        np.fill_diagonal(sq, 0.0)
        return float(np.sum(sq))

    schedule = _round_robin_schedule(n)
    # entries below this cannot push the off-diagonal norm back above tol
    skip = tol / (10.0 * n)
    converged = False
    for _ in range(max_sweeps):
        if _off2() < tol * tol:
            converged = True
            break
        for ps, qs in schedule:
            apq = b[ps, qs]
            act = np.abs(apq) > skip
            if not np.any(act):
                continue
            p, q, apq = ps[act], qs[act], apq[act]
            app = b[p, p]
            aqq = b[q, q]
            theta = 0.5 * (aqq - app) / apq
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            big = np.abs(theta) > 1e100
            if np.any(big):
                t[big] = 0.5 / theta[big]
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            cc, ss = c[:, None], s[:, None]
            bp = b[p].copy()
            bq = b[q].copy()
            b[p] = cc * bp - ss * bq
            b[q] = ss * bp + cc * bq
            bp = b[:, p].copy()
            bq = b[:, q].copy()
            b[:, p] = bp * c - bq * s
            b[:, q] = bp * s + bq * c
            b[p, p] = app - t * apq
            b[q, q] = aqq + t * apq
            b[p, q] = 0.0
            b[q, p] = 0.0

            vp = vt[p].copy()
            vq = vt[q].copy()
            vt[p] = cc * vp - ss * vq
            vt[q] = ss * vp + cc * vq
    if not converged and _off2() >= tol * tol:
        off = np.sqrt(max(_off2(), 0.0))
        raise RuntimeError(
            f"Jacobi iteration did not converge after {max_sweeps} sweeps "
            f"(off-diagonal norm {off:.3e}, tol {tol:.3e})"
        )

    lam = b.diagonal().copy()
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    u = vt.T[:, order].copy()
    for k in range(n):
        col = u[:, k]
        lead = np.nonzero(np.abs(col) > 1e-12)[0]
        if lead.size and col[lead[0]] < 0:
            u[:, k] = -col
    return EigenBasis(u=u, lam=lam)


def gft(basis: EigenBasis, f: np.ndarray) -> np.ndarray:
    """Graph Fourier transform U^T f. Accepts a vector or an (N, C) matrix."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != basis.dim:
        raise ValueError(f"signal has {f.shape[0]} rows, basis has dimension {basis.dim}")
    return basis.u.T @ f


def igft(basis: EigenBasis, fhat: np.ndarray) -> np.ndarray:
    """Inverse transform U fhat."""
    fhat = np.asarray(fhat, dtype=np.float64)
    if fhat.shape[0] != basis.dim:
        raise ValueError(f"coefficients have {fhat.shape[0]} rows, basis has dimension {basis.dim}")
    return basis.u @ fhat


def apply_operator(basis: EigenBasis, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Apply the spectral filter U diag(g) U^T to the columns of f."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (basis.dim,):
        raise ValueError(f"filter must have shape ({basis.dim},), got {g.shape}")
    fhat = gft(basis, f)
    scaled = g[:, None] * fhat if fhat.ndim == 2 else g * fhat
    return igft(basis, scaled)
