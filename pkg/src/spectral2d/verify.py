"""Self-contained property checks runnable from the command line.

Each check exercises one contract of the library on small seeded random
instances and reports pass/fail with a short measurement. The checks are
grouped into scopes matching the module layout; `run` executes a selection
and returns structured results for the CLI to print.

These are smoke-level guarantees, deliberately cheap. The full test suite
is the authority; this module exists so an installed copy can be probed
without a test runner.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import failure_lab
from .chebyshev import cheb_eval, cheb_nodes, conv2d_cheb, grid_from_theta, interpolate
from .graph_core import Graph, normalized_laplacian, shifted_laplacian
from .model import TrainConfig, backward, forward, init_params, loss_ce, param_count, train
from .paradigms import (
    conv2d_block,
    conv2d_fcn,
    exact_construct,
    min_error_p1,
    min_error_p3,
    paradigm1,
    paradigm2,
    paradigm3,
    specialize_grid,
)
from .spectral import EigenBasis, eig_sym, gft, igft


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_graph(rng: np.random.Generator, n: int, p: float = 0.4) -> Graph:
    edges = {(i, (i + 1) % n) if i < (i + 1) % n else ((i + 1) % n, i) for i in range(n)}
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < p
    for u, v in zip(iu[hit], ju[hit]):
        edges.add((int(u), int(v)))
    return Graph(n, tuple(sorted(edges)))


def _basis(g: Graph) -> EigenBasis:
    return eig_sym(normalized_laplacian(g).to_dense())


def _result(name: str, dev: float, tol: float) -> CheckResult:
    return CheckResult(name, dev < tol, f"max dev {dev:.3e} (tol {tol:.0e})")


# ---------------------------------------------------------------- spectral


def check_laplacian_structure() -> CheckResult:
    rng = np.random.default_rng(101)
    dev = 0.0
    for n in (5, 9, 14):
        lap = normalized_laplacian(_random_graph(rng, n)).to_dense()
        dev = max(dev, float(np.abs(lap - lap.T).max()))
        dev = max(dev, float(np.abs(np.diag(lap) - 1.0).max()))
    return _result("laplacian_structure", dev, 1e-12)


def check_spectrum_range() -> CheckResult:
    rng = np.random.default_rng(102)
    worst = 0.0
    for n in (6, 12):
        lam = _basis(_random_graph(rng, n)).lam
        worst = max(worst, float(max(-lam.min(), lam.max() - 2.0, 0.0)))
        lam_shift = eig_sym(shifted_laplacian(normalized_laplacian(_random_graph(rng, n))).to_dense()).lam
        worst = max(worst, float(max(-1.0 - lam_shift.min(), lam_shift.max() - 1.0, 0.0)))
    return _result("spectrum_range", worst, 1e-9)


def check_eigenbasis_reconstruction() -> CheckResult:
    rng = np.random.default_rng(103)
    dev = 0.0
    for n in (6, 11):
        lap = normalized_laplacian(_random_graph(rng, n)).to_dense()
        b = eig_sym(lap)
        dev = max(dev, float(np.abs(b.u @ b.u.T - np.eye(n)).max()))
        dev = max(dev, float(np.abs(b.u @ np.diag(b.lam) @ b.u.T - lap).max()))
    return _result("eigenbasis_reconstruction", dev, 1e-8)


def check_transform_roundtrip() -> CheckResult:
    rng = np.random.default_rng(104)
    g = _random_graph(rng, 10)
    basis = _basis(g)
    f = rng.standard_normal((10, 3))
    dev = float(np.abs(igft(basis, gft(basis, f)) - f).max())
    parseval = abs(float(np.linalg.norm(gft(basis, f))) - float(np.linalg.norm(f)))
    return _result("transform_roundtrip", max(dev, parseval), 1e-10)


# --------------------------------------------------------------- paradigms


def check_block_fcn_equivalence() -> CheckResult:
    rng = np.random.default_rng(201)
    dev = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        c = int(rng.integers(1, 5))
        basis = _basis(_random_graph(rng, n))
        f = rng.standard_normal((n, c))
        grid = rng.standard_normal((c, c, n))
        w = np.einsum("in,cjn,mn->ijmc", basis.u, grid, basis.u)
        dev = max(dev, float(np.abs(conv2d_block(basis, f, grid) - conv2d_fcn(f, w)).max()))
    return _result("block_fcn_equivalence", dev, 1e-10)


def check_specializations() -> CheckResult:
    rng = np.random.default_rng(202)
    dev = 0.0
    for _ in range(20):
        n, c = int(rng.integers(2, 9)), int(rng.integers(2, 5))
        basis = _basis(_random_graph(rng, n))
        f = rng.standard_normal((n, c))
        g = rng.standard_normal(n)
        r = rng.standard_normal((c, c))
        gs = rng.standard_normal((c, n))
        pairs = [
            (specialize_grid("P1", g=g, channels=c), paradigm1(basis, f, g)),
            (specialize_grid("P2", g=g, r=r), paradigm2(basis, f, g, r)),
            (specialize_grid("P3", gs=gs), paradigm3(basis, f, gs)),
        ]
        for grid, direct in pairs:
            dev = max(dev, float(np.abs(conv2d_block(basis, f, grid) - direct).max()))
    return _result("specializations", dev, 1e-10)


def check_exact_construction() -> CheckResult:
    rng = np.random.default_rng(203)
    worst = 0.0
    for _ in range(10):
        n, c = int(rng.integers(3, 13)), int(rng.integers(1, 5))
        basis = _basis(_random_graph(rng, n))
        f = rng.standard_normal((n, c))
        z = rng.standard_normal((n, c))
        grid = exact_construct(basis, f, z)
        worst = max(worst, float(np.linalg.norm(conv2d_block(basis, f, grid) - z)))
    return _result("exact_construction", worst, 1e-8)


def check_floor_oracles_tight() -> CheckResult:
    # descent from random starts must never beat the closed forms
    rng = np.random.default_rng(204)
    gap = 0.0
    for _ in range(3):
        n, c = 5, 3
        fhat = rng.standard_normal((n, c))
        fhat[0, 0] = 0.0
        zhat = rng.standard_normal((n, c))
        got1, _ = failure_lab.optimize_objective("P1", fhat, zhat, restarts=20, steps=400, seed=1)
        got3, _ = failure_lab.optimize_objective("P3", fhat, zhat, restarts=20, steps=400, seed=2)
        gap = max(gap, min_error_p1(fhat, zhat) - got1, min_error_p3(fhat, zhat) - got3)
    return _result("floor_oracles_tight", gap, 1e-6)


def check_linearity() -> CheckResult:
    rng = np.random.default_rng(205)
    basis = _basis(_random_graph(rng, 7))
    f1 = rng.standard_normal((7, 3))
    f2 = rng.standard_normal((7, 3))
    grid = rng.standard_normal((3, 3, 7))
    a, b = 1.7, -0.6
    mixed = conv2d_block(basis, a * f1 + b * f2, grid)
    split = a * conv2d_block(basis, f1, grid) + b * conv2d_block(basis, f2, grid)
    return _result("linearity", float(np.abs(mixed - split).max()), 1e-10)


# --------------------------------------------------------------- chebyshev


def check_basis_coefficients() -> CheckResult:
    worst = 0.0
    for degree in (4, 9, 16):
        nodes = cheb_nodes(degree)
        for k in range(degree + 1):
            coef = interpolate(cheb_eval(k, nodes), degree)
            want = np.zeros(degree + 1)
            want[k] = 1.0
            worst = max(worst, float(np.abs(coef - want).max()))
    return _result("basis_coefficients", worst, 1e-10)


def check_node_sums() -> CheckResult:
    worst = 0.0
    for degree in (3, 8):
        nodes = cheb_nodes(degree)
        for d in range(2 * degree + 2):
            got = float(cheb_eval(d, nodes).sum())
            want = float(degree + 1) if d == 0 else 0.0
            worst = max(worst, abs(got - want))
    return _result("node_sums", worst, 1e-10)


def check_abs_interpolant_decay() -> CheckResult:
    xs = np.linspace(-1.0, 1.0, 1001)
    errs = []
    for degree in (4, 8, 16):
        coef = interpolate(np.abs(cheb_nodes(degree)), degree)
        approx = sum(coef[d] * cheb_eval(d, xs) for d in range(degree + 1))
        errs.append(float(np.abs(approx - np.abs(xs)).max()))
    ok = errs[0] > errs[1] > errs[2]
    return CheckResult(
        "abs_interpolant_decay", ok, "errors " + " > ".join(f"{e:.2e}" for e in errs)
    )


def check_cheb_matches_spectral_path() -> CheckResult:
    rng = np.random.default_rng(301)
    dev = 0.0
    for n, degree in [(8, 4), (16, 7)]:
        g = _random_graph(rng, n)
        lap = normalized_laplacian(g)
        lhat = shifted_laplacian(lap)
        basis = eig_sym(lhat.to_dense())
        c = 3
        f = rng.standard_normal((n, c))
        theta = rng.standard_normal((c, c, degree + 1))
        fast = conv2d_cheb(lhat, f, theta)
        slow = conv2d_block(basis, f, grid_from_theta(theta, basis.lam))
        dev = max(dev, float(np.abs(fast - slow).max()))
    return _result("cheb_matches_spectral_path", dev, 1e-8)


# ------------------------------------------------------------------- model


def check_model_gradients() -> CheckResult:
    rng = np.random.default_rng(401)
    worst = 0.0
    for trial in range(3):
        n, k, h, c, d = 6, 3, 4, 2, 3
        g = _random_graph(rng, n)
        lhat = shifted_laplacian(normalized_laplacian(g))
        x = rng.standard_normal((n, k))
        labels = rng.integers(0, c, size=n)
        mask = np.ones(n, dtype=bool)
        params = init_params(k, h, c, d, seed=trial)
        _, grads = backward(params, lhat, x, labels, mask)
        step = 1e-5

        def loss_at(p):
            return loss_ce(forward(p, lhat, x), labels, mask)

        for fname in ("w1", "theta"):
            arr = getattr(params, fname)
            flat_i = int(rng.integers(0, arr.size))
            vals = []
            for sign in (1.0, -1.0):
                bumped = arr.reshape(-1).copy()
                bumped[flat_i] += sign * step
                vals.append(
                    loss_at(dataclasses.replace(params, **{fname: bumped.reshape(arr.shape)}))
                )
            num = (vals[0] - vals[1]) / (2.0 * step)
            an_i = getattr(grads, fname).reshape(-1)[flat_i]
            denom = max(abs(num), abs(an_i), 1e-7)
            worst = max(worst, abs(num - an_i) / denom)
    return _result("model_gradients", worst, 1e-4)


def check_training_deterministic() -> CheckResult:
    rng = np.random.default_rng(402)
    n = 24
    g = _random_graph(rng, n, p=0.2)
    centers = np.array([[1.5, -1.5], [-1.5, 1.5]])
    labels = np.arange(n) % 2
    x = centers[labels] + 0.3 * rng.standard_normal((n, 2))
    splits = {"train": np.arange(n) % 3 != 0, "valid": np.arange(n) % 3 == 0}
    cfg = TrainConfig(max_epochs=30, patience=10, dropout=0.0, degree=2, hidden=8, seed=5)
    _, h1 = train(cfg, g, x, labels, splits)
    _, h2 = train(cfg, g, x, labels, splits)
    same = h1["train_loss"] == h2["train_loss"] and h1["valid_acc"] == h2["valid_acc"]
    improved = h1["train_loss"][-1] < h1["train_loss"][0]
    return CheckResult(
        "training_deterministic",
        bool(same and improved),
        f"loss {h1['train_loss'][0]:.3f} -> {h1['train_loss'][-1]:.3f}, reruns match: {same}",
    )


def check_early_stopping_restores_best() -> CheckResult:
    rng = np.random.default_rng(403)
    n = 24
    g = _random_graph(rng, n, p=0.2)
    labels = np.arange(n) % 2
    x = rng.standard_normal((n, 2)) + 2.0 * (labels[:, None] - 0.5)
    splits = {"train": np.arange(n) % 3 != 0, "valid": np.arange(n) % 3 == 0}
    cfg = TrainConfig(max_epochs=40, patience=8, dropout=0.0, degree=2, hidden=8, seed=9)
    _, hist = train(cfg, g, x, labels, splits)
    ok = hist["best_valid_acc"] == max(hist["valid_acc"])
    return CheckResult(
        "early_stopping_restores_best", bool(ok), f"best valid acc {hist['best_valid_acc']:.3f}"
    )


def check_param_count() -> CheckResult:
    k, h, c, d = 5, 7, 3, 4
    full = param_count(init_params(k, h, c, d, seed=0))
    shared = param_count(init_params(k, h, c, d, seed=0, conv_mode="p1"))
    want_full = h * (k + c) + h + c + (d + 1) * c * c
    want_shared = h * (k + c) + h + c + (d + 1)
    ok = full == want_full and shared == want_shared
    return CheckResult("param_count", ok, f"2d {full} vs {want_full}, p1 {shared} vs {want_shared}")


SCOPES = {
    "spectral": [
        check_laplacian_structure,
        check_spectrum_range,
        check_eigenbasis_reconstruction,
        check_transform_roundtrip,
    ],
    "paradigms": [
        check_block_fcn_equivalence,
        check_specializations,
        check_exact_construction,
        check_floor_oracles_tight,
        check_linearity,
    ],
    "chebyshev": [
        check_basis_coefficients,
        check_node_sums,
        check_abs_interpolant_decay,
        check_cheb_matches_spectral_path,
    ],
    "model": [
        check_model_gradients,
        check_training_deterministic,
        check_early_stopping_restores_best,
        check_param_count,
    ],
}


def run(scope: str = "all") -> list[CheckResult]:
    """Execute one scope's checks, or every scope for "all"."""
    if scope == "all":
        names = list(SCOPES)
    elif scope in SCOPES:
        names = [scope]
    else:
        raise ValueError(f"scope must be one of all, {', '.join(SCOPES)}; got {scope!r}")
    return [check() for name in names for check in SCOPES[name]]
