"""Graph convolution paradigms and the two-dimensional generalization.

Filter containers use fixed axis conventions:

* ``FilterGrid``: array of shape (C, C, N); entry ``grid[c, j]`` is the
  length-N spectral filter applied to input channel ``c`` when forming
  output channel ``j``. The column law of the 2-D convolution is
  ``Zhat[:, j] = sum_c grid[c, j] * Fhat[:, c]``.
* per-column filters: array of shape (C, N); row ``c`` filters column ``c``.
* fully-connected coefficients: array of shape (N, C, N, C); entry
  ``w[i, j, n, c]`` multiplies ``F[n, c]`` in output ``Z[i, j]``.

The 2-D convolution subsumes three restricted schemes: one shared filter
(``P1``), a shared filter followed by channel mixing (``P2``), and one
filter per channel without mixing (``P3``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import EigenBasis, apply_operator, gft, igft

# a frequency row whose largest entry is below this is treated as empty
SUPPORT_EPS = 1e-9
# entries below this count as structural zeros in closed-form minima
ZERO_EPS = 1e-12
# a target entry above this on an empty input slot is a violation
TARGET_EPS = 1e-6
# relative cutoff for numerical rank
RANK_REL_EPS = 1e-8


class ZeroFrequencyRowError(ValueError):
    """The input signal has an empty frequency row, so no filter grid can
    reach an arbitrary target there."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(
            f"frequency row {row} of the input is numerically zero "
            f"(max magnitude <= {SUPPORT_EPS:g}); the zero-error construction "
            "is infeasible for arbitrary targets"
        )


def vec(m: np.ndarray) -> np.ndarray:
    """Stack columns: entry i + N*j of the result is M[i, j]."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    return m.flatten(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of ``vec``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape {v.size} entries to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def paradigm1(basis: EigenBasis, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """One shared spectral filter across all channels: Z = U diag(g) U^T F."""
    return apply_operator(basis, g, f)


def paradigm2(basis: EigenBasis, f: np.ndarray, g: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Shared filter followed by channel mixing: Z = U diag(g) U^T F R."""
    r = np.asarray(r, dtype=np.float64)
    c = np.asarray(f).shape[1]
    if r.shape != (c, c):
        raise ValueError(f"mixing matrix must be {c}x{c}, got {r.shape}")
    return apply_operator(basis, g, f) @ r


def paradigm3(basis: EigenBasis, f: np.ndarray, gs: np.ndarray) -> np.ndarray:
    """One filter per channel, no mixing: Z[:, c] = U diag(gs[c]) U^T F[:, c]."""
    f = np.asarray(f, dtype=np.float64)
    gs = np.asarray(gs, dtype=np.float64)
    if gs.shape != (f.shape[1], basis.dim):
        raise ValueError(f"expected filters of shape {(f.shape[1], basis.dim)}, got {gs.shape}")
    fhat = gft(basis, f)
    return igft(basis, gs.T * fhat)


def conv2d_fcn(f: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Fully-connected form: Z[i, j] = sum_n sum_c w[i, j, n, c] F[n, c].

    The inner sums run node-major (n outer, c inner) with plain sequential
    accumulation, so the result is bit-reproducible. Intended for small
    instances and equivalence checks; the block form is the fast path.
    """
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, c = f.shape
    if w.shape != (n, c, n, c):
        raise ValueError(f"coefficients must have shape {(n, c, n, c)}, got {w.shape}")
    z = np.empty((n, c))
    for i in range(n):
        for j in range(c):
            total = 0.0
            for row in (w[i, j] * f).tolist():
                for val in row:
                    total += val
            z[i, j] = total
    return z


def conv2d_block(basis: EigenBasis, f: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Two-dimensional convolution in block form.

    Applies ``Zhat[:, j] = sum_c grid[c, j] * Fhat[:, c]`` in the frequency
    domain and transforms back. Equivalent to the fully-connected form under
    the index map ``w[i, j, n, c] = Phi(c, j)[i, n]`` with
    ``Phi(c, j) = U diag(grid[c, j]) U^T``.
    """
    f = np.asarray(f, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    n, c = f.shape
    if grid.shape != (c, c, n):
        raise ValueError(f"filter grid must have shape {(c, c, n)}, got {grid.shape}")
    fhat = gft(basis, f)
    zhat = np.einsum("cjn,nc->nj", grid, fhat)
    return igft(basis, zhat)


def specialize_grid(
    kind: str,
    g: np.ndarray | None = None,
    r: np.ndarray | None = None,
    gs: np.ndarray | None = None,
    channels: int | None = None,
) -> np.ndarray:
    """Embed a restricted scheme into a full filter grid.

    ``P1`` needs ``g`` and ``channels``: the diagonal carries the shared
    filter. ``P2`` needs ``g`` and ``r``: ``grid[c, j] = r[c, j] * g``, so
    the block law reproduces ``U diag(g) U^T F R``. ``P3`` needs ``gs`` of
    shape (C, N): the diagonal carries one filter per channel.
    """
    if kind == "P1":
        if g is None or channels is None:
            raise ValueError("P1 requires g and channels")
        g = np.asarray(g, dtype=np.float64)
        grid = np.zeros((channels, channels, g.size))
        for c in range(channels):
            grid[c, c] = g
        return grid
    if kind == "P2":
        if g is None or r is None:
            raise ValueError("P2 requires g and r")
        g = np.asarray(g, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError(f"mixing matrix must be square, got {r.shape}")
        return r[:, :, None] * g[None, None, :]
    if kind == "P3":
        if gs is None:
            raise ValueError("P3 requires gs")
        gs = np.asarray(gs, dtype=np.float64)
        if gs.ndim != 2:
            raise ValueError(f"per-column filters must be 2-D, got shape {gs.shape}")
        c = gs.shape[0]
        grid = np.zeros((c, c, gs.shape[1]))
        for k in range(c):
            grid[k, k] = gs[k]
        return grid
    raise ValueError(f"unknown specialization kind {kind!r}")


def exact_construct(basis: EigenBasis, f: np.ndarray, z_star: np.ndarray) -> np.ndarray:
    """Filter grid reproducing an arbitrary target exactly.

    In the frequency domain each entry of the target couples one row of the
    input across channels, one linear equation in C unknowns per (row,
    output) pair. This returns the minimum-norm solution

        grid[c, j, n] = Fhat[n, c] * Zhat[n, j] / ||Fhat[n, :]||^2,

    which is defined whenever no frequency row of the input is empty.
    Raises ``ZeroFrequencyRowError`` naming the first offending row.
    """
    f = np.asarray(f, dtype=np.float64)
    z_star = np.asarray(z_star, dtype=np.float64)
    if f.shape != z_star.shape:
        raise ValueError(f"input and target shapes differ: {f.shape} vs {z_star.shape}")
    fhat = gft(basis, f)
    zhat = gft(basis, z_star)
    support = np.abs(fhat).max(axis=1)
    dead = np.nonzero(support <= SUPPORT_EPS)[0]
    if dead.size:
        raise ZeroFrequencyRowError(int(dead[0]))
    norms2 = (fhat * fhat).sum(axis=1)
    return np.einsum("nc,nj->cjn", fhat, zhat / norms2[:, None])


def min_error_p1(fhat: np.ndarray, zhat: np.ndarray) -> float:
    """Exact minimum of ||diag(g) Fhat - Zhat||_F over the shared filter g.

    Decomposes row-wise into scalar least squares:
    g_n = <Fhat[n], Zhat[n]> / ||Fhat[n]||^2, zero on empty rows.
    """
    fhat = np.asarray(fhat, dtype=np.float64)
    zhat = np.asarray(zhat, dtype=np.float64)
    norms2 = (fhat * fhat).sum(axis=1)
    inner = (fhat * zhat).sum(axis=1)
    g = np.divide(inner, norms2, out=np.zeros_like(inner), where=norms2 > 0)
    resid = zhat - g[:, None] * fhat
    return float(np.sqrt((resid * resid).sum()))


def min_error_p3(fhat: np.ndarray, zhat: np.ndarray) -> float:
    """Exact minimum over per-column filters.

    Every entry with input support can be matched by its own coefficient;
    the residual collects target energy sitting on structural zeros of the
    input (entries with ``|Fhat| <= 1e-12``).
    """
    fhat = np.asarray(fhat, dtype=np.float64)
    zhat = np.asarray(zhat, dtype=np.float64)
    blocked = np.abs(fhat) <= ZERO_EPS
    return float(np.sqrt((zhat[blocked] ** 2).sum()))


def _p2_half_step(fhat: np.ndarray, zhat: np.ndarray, g: np.ndarray) -> tuple[float, np.ndarray]:
    """One exact alternating update: best R for this g, then best g for that R.
    Returns the objective after the update together with the new g."""
    r, *_ = np.linalg.lstsq(g[:, None] * fhat, zhat, rcond=None)
    proj = fhat @ r
    num = (proj * zhat).sum(axis=1)
    den = (proj * proj).sum(axis=1)
    g_new = np.divide(num, den, out=np.zeros_like(num), where=den > 1e-300)
    resid = g_new[:, None] * proj - zhat
    return float(np.sqrt((resid * resid).sum())), g_new


def min_error_p2(fhat: np.ndarray, zhat: np.ndarray, restarts: int = 8, iters: int = 200) -> float:
    """Upper bound on min ||diag(g) Fhat R - Zhat||_F by alternating least squares.

    The problem is bilinear in (g, R); each half-step solves its block
    exactly, so the objective never increases within a run. Plain alternation
    converges only linearly near flat minima, so each iteration also tries a
    few extrapolated steps along the last g displacement and keeps whichever
    candidate scores best. Multiple seeded restarts guard against poor local
    minima. Deterministic for fixed inputs.
    """
    fhat = np.asarray(fhat, dtype=np.float64)
    zhat = np.asarray(zhat, dtype=np.float64)
    n = fhat.shape[0]
    rng = np.random.default_rng(1234)
    best = np.inf
    for start in range(max(1, restarts)):
        g = np.ones(n) if start == 0 else rng.standard_normal(n)
        g_prev: np.ndarray | None = None
        prev = np.inf
        for _ in range(max(1, iters)):
            err, g_new = _p2_half_step(fhat, zhat, g)
            if g_prev is not None:
                step = g_new - g_prev
                for beta in (1.0, 3.0, 9.0):
                    trial_err, trial_g = _p2_half_step(fhat, zhat, g_new + beta * step)
                    if trial_err < err:
                        err, g_new = trial_err, trial_g
            if err < best:
                best = err
            if prev - err < 1e-15:
                break
            prev = err
            g_prev = g
            g = g_new
    return best


def _numerical_rank(mat: np.ndarray) -> int:
    """Rank from singular values, computed via the eigenvalues of the Gram
    matrix of the smaller side; cutoff is 1e-8 relative to the largest."""
    from .spectral import eig_sym

    mat = np.asarray(mat, dtype=np.float64)
    gram = mat.T @ mat if mat.shape[1] <= mat.shape[0] else mat @ mat.T
    scale = max(1.0, float(np.abs(gram).max()))
    lam = eig_sym(gram, tol=1e-12 * scale).lam
    sig = np.sqrt(np.clip(lam, 0.0, None))
    top = float(sig.max(initial=0.0))
    if top == 0.0:
        return 0
    return int(np.sum(sig > RANK_REL_EPS * top))


@dataclass(frozen=True)
class CertificateReport:
    """Structural reasons a restricted scheme cannot reach the target."""

    rank_f: int
    rank_z: int
    violations: tuple[tuple[int, int], ...]
    flags: dict[str, bool]


def infeasibility_certificates(
    f: np.ndarray, z_star: np.ndarray, basis: EigenBasis
) -> CertificateReport:
    """Check the target against the reachable sets of the restricted schemes.

    A shared filter preserves column space, so ``rank(Z*) > rank(F)`` rules
    out P1 and P2 (and the sum of two P2 terms once the doubled rank bound
    fails). Target energy on empty input slots rules out P1 and P3.
    """
    fhat = gft(basis, np.asarray(f, dtype=np.float64))
    zhat = gft(basis, np.asarray(z_star, dtype=np.float64))
    rank_f = _numerical_rank(fhat)
    rank_z = _numerical_rank(zhat)
    hit = np.nonzero((np.abs(fhat) < SUPPORT_EPS) & (np.abs(zhat) > TARGET_EPS))
    violations = tuple((int(a), int(b)) for a, b in zip(*hit))
    rank_gap = rank_z > rank_f
    flags = {
        "P1": rank_gap or bool(violations),
        "P2": rank_gap,
        "P3": bool(violations),
        "P2+P2": rank_z > 2 * rank_f,
    }
    return CertificateReport(rank_f=rank_f, rank_z=rank_z, violations=violations, flags=flags)


def combined_paradigm(
    basis: EigenBasis,
    f: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    w: np.ndarray,
    pc: np.ndarray,
) -> np.ndarray:
    """Sum of all three restricted schemes applied to the same input:
    one shared filter p, one mixed term (q, w), one per-column bank pc."""
    return paradigm1(basis, f, p) + paradigm2(basis, f, q, w) + paradigm3(basis, f, pc)
