"""Node classifier with an MLP feature transform and a Chebyshev filter head.

The forward pass is h(X) through a two-layer rectifier MLP followed by the
coefficient-tensor convolution; training is full-batch cross entropy with
Adam, early stopping on validation accuracy, and restoration of the best
parameters. Gradients are written out by hand in reverse mode so the whole
pipeline stays dependency-free and bit-reproducible; correctness is pinned
by finite-difference tests.

Dropout uses a counter-based generator keyed by (seed, epoch): the backward
pass replays the identical mask without storing it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chebyshev import _cheb_matrix, cheb_basis_mats
from .graph_core import Graph, SparseSym, normalized_laplacian, shifted_laplacian


@dataclass(frozen=True)
class ModelParams:
    """All learnable tensors.

    ``w1``/``b1`` and ``w2``/``b2`` are the MLP layers K->H->C. ``theta``
    is the coefficient tensor: shape (C, C, D+1) for the full 2-D head, or
    (D+1,) when the head is restricted to one shared scalar filter.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    theta: np.ndarray


_FIELDS = ("w1", "b1", "w2", "b2", "theta")


def _tree_map(fn, *trees: ModelParams) -> ModelParams:
    return ModelParams(**{f: fn(*[getattr(t, f) for t in trees]) for f in _FIELDS})


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    dropout: float = 0.5
    max_epochs: int = 2000
    patience: int = 200
    seed: int = 0
    degree: int = 10
    hidden: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    conv_mode: str = "2d"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.patience < 1 or self.patience > self.max_epochs:
            raise ValueError(
                f"patience must lie in [1, max_epochs], got {self.patience} with max_epochs {self.max_epochs}"
            )
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")
        if self.hidden < 1:
            raise ValueError(f"hidden width must be positive, got {self.hidden}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.conv_mode not in ("2d", "p1"):
            raise ValueError(f"conv_mode must be '2d' or 'p1', got {self.conv_mode!r}")


@dataclass(frozen=True)
class AdamState:
    step: int
    m: ModelParams
    v: ModelParams


def init_params(k: int, h: int, c: int, d: int, seed: int, conv_mode: str = "2d") -> ModelParams:
    """Fresh parameters: uniform(-s, s) MLP weights with s = sqrt(6/(fan_in+fan_out)),
    zero biases, and a coefficient tensor that starts as an all-pass filter.

    The all-pass start is theta[c, j, b] = delta_cj for every node sample
    (or all-ones in the shared-filter mode): the convolution then maps F to
    (D+1) F, a benign scaling of the MLP features.
    """
    if k < 1 or h < 1 or c < 1 or d < 0:
        raise ValueError(f"invalid dimensions k={k} h={h} c={c} d={d}")
    if conv_mode not in ("2d", "p1"):
        raise ValueError(f"conv_mode must be '2d' or 'p1', got {conv_mode!r}")
    rng = np.random.default_rng(seed)
    s1 = np.sqrt(6.0 / (k + h))
    s2 = np.sqrt(6.0 / (h + c))
    if conv_mode == "2d":
        theta = np.repeat(np.eye(c)[:, :, None], d + 1, axis=2)
    else:
        theta = np.ones(d + 1)
    return ModelParams(
        w1=rng.uniform(-s1, s1, size=(k, h)),
        b1=np.zeros(h),
        w2=rng.uniform(-s2, s2, size=(h, c)),
        b2=np.zeros(c),
        theta=theta,
    )


def _dropout_mask(shape: tuple[int, ...], rate: float, key: tuple[int, int]) -> np.ndarray:
    # counter-based stream: the same (seed, epoch) key always yields the
    # same mask, so forward and backward never need to share state
    gen = np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))
    return (gen.random(shape) >= rate) / (1.0 - rate)


def _forward_cache(
    params: ModelParams,
    lhat: SparseSym,
    x: np.ndarray,
    train_mode: bool,
    dropout: float,
    key: tuple[int, int],
) -> tuple[np.ndarray, dict]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != lhat.dim:
        raise ValueError(f"features must be ({lhat.dim}, K), got {x.shape}")
    if x.shape[1] != params.w1.shape[0]:
        raise ValueError(f"features have {x.shape[1]} columns, first layer expects {params.w1.shape[0]}")
    a1 = x @ params.w1 + params.b1
    f1 = np.maximum(a1, 0.0)
    if train_mode and dropout > 0.0:
        mask = _dropout_mask(f1.shape, dropout, key)
    else:
        mask = None
    fd = f1 if mask is None else f1 * mask
    feat = fd @ params.w2 + params.b2

    degree = params.theta.shape[-1] - 1
    tmat = _cheb_matrix(degree)
    mats = cheb_basis_mats(lhat, feat, degree)
    if params.theta.ndim == 3:
        mixers = np.tensordot(tmat, params.theta, axes=([1], [2]))
        logits = np.zeros_like(feat)
        for d in range(degree + 1):
            logits += mats[d] @ mixers[d]
    else:
        mixers = tmat @ params.theta
        logits = np.zeros_like(feat)
        for d in range(degree + 1):
            logits += mixers[d] * mats[d]
    if not np.isfinite(logits).all():
        raise FloatingPointError("non-finite logits; check learning rate and inputs")
    cache = {
        "x": x,
        "a1": a1,
        "mask": mask,
        "fd": fd,
        "mats": mats,
        "tmat": tmat,
        "mixers": mixers,
    }
    return logits, cache


def forward(
    params: ModelParams,
    lhat: SparseSym,
    x: np.ndarray,
    train_mode: bool = False,
    dropout: float = 0.0,
    key: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """Logits (N, C) for every node. Dropout is active only in train mode."""
    logits, _ = _forward_cache(params, lhat, x, train_mode, dropout, key)
    return logits


def feature_transform(
    params: ModelParams,
    x: np.ndarray,
    train_mode: bool = False,
    dropout: float = 0.0,
    key: tuple[int, int] = (0, 0),
) -> np.ndarray:
    """The MLP half on its own: h(X) before the convolution head."""
    x = np.asarray(x, dtype=np.float64)
    f1 = np.maximum(x @ params.w1 + params.b1, 0.0)
    if train_mode and dropout > 0.0:
        f1 = f1 * _dropout_mask(f1.shape, dropout, key)
    return f1 @ params.w2 + params.b2


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels_mask(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    if labels.shape != (logits.shape[0],) or mask.shape != (logits.shape[0],):
        raise ValueError(
            f"labels and mask must have shape ({logits.shape[0]},), got {labels.shape} and {mask.shape}"
        )
    if not mask.any():
        raise ValueError("mask selects no nodes")
    return labels, mask


def loss_ce(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean cross entropy -log softmax(logits)[label] over the masked nodes,
    stabilized by row-max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    labels, mask = _check_labels_mask(logits, labels, mask)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(logits.shape[0]), labels]
    return float((log_norm - picked)[mask].mean())


def backward(
    params: ModelParams,
    lhat: SparseSym,
    x: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray,
    dropout: float = 0.0,
    key: tuple[int, int] = (0, 0),
) -> tuple[float, ModelParams]:
    """Loss and its exact gradient with respect to every parameter.

    The filter-head gradient uses the mixer structure: with M_d the per-order
    mixing matrix, dL/dM_d = B_d^T G where B_d = T_d(Lhat) F and G is the
    logit gradient; the node-sample gradient follows by contracting with
    T_d(x_b). The feature gradient reuses the same recurrence on G, since
    T_d(Lhat) is symmetric.
    """
    logits, cache = _forward_cache(params, lhat, x, True, dropout, key)
    labels, mask_b = _check_labels_mask(logits, labels, mask)
    n_sel = int(mask_b.sum())

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(logits.shape[0]), labels]
    loss = float((log_norm - picked)[mask_b].mean())

    g = _softmax(logits)
    g[np.arange(logits.shape[0]), labels] -= 1.0
    g[~mask_b] = 0.0
    g /= n_sel

    mats = cache["mats"]
    tmat = cache["tmat"]
    mixers = cache["mixers"]
    degree = len(mats) - 1
    gmats = cheb_basis_mats(lhat, g, degree)

    if params.theta.ndim == 3:
        dmix = np.stack([mats[d].T @ g for d in range(degree + 1)])
        dtheta = np.tensordot(tmat, dmix, axes=([0], [0])).transpose(1, 2, 0)
        dfeat = np.zeros_like(g)
        for d in range(degree + 1):
            dfeat += gmats[d] @ mixers[d].T
    else:
        dmix = np.array([(mats[d] * g).sum() for d in range(degree + 1)])
        dtheta = tmat.T @ dmix
        dfeat = np.zeros_like(g)
        for d in range(degree + 1):
            dfeat += mixers[d] * gmats[d]

    dw2 = cache["fd"].T @ dfeat
    db2 = dfeat.sum(axis=0)
    dfd = dfeat @ params.w2.T
    df1 = dfd if cache["mask"] is None else dfd * cache["mask"]
    da1 = df1 * (cache["a1"] > 0.0)
    dw1 = cache["x"].T @ da1
    db1 = da1.sum(axis=0)

    return loss, ModelParams(w1=dw1, b1=db1, w2=dw2, b2=db2, theta=dtheta)


def init_adam(params: ModelParams) -> AdamState:
    zeros = _tree_map(np.zeros_like, params)
    return AdamState(step=0, m=zeros, v=zeros)


def adam_step(
    state: AdamState, params: ModelParams, grads: ModelParams, config: TrainConfig
) -> tuple[ModelParams, AdamState]:
    """One Adam update with bias correction; weight decay enters as an
    additive gradient term on every tensor."""
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t

    def upd(p, g, m, v):
        g = g + config.weight_decay * p
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * g * g
        step = config.learning_rate * (m_new / corr1) / (np.sqrt(v_new / corr2) + config.eps)
        return p - step, m_new, v_new

    new_p, new_m, new_v = [], [], []
    for f in _FIELDS:
        p, m, v = upd(getattr(params, f), getattr(grads, f), getattr(state.m, f), getattr(state.v, f))
        new_p.append(p)
        new_m.append(m)
        new_v.append(v)
    return (
        ModelParams(*new_p),
        AdamState(step=t, m=ModelParams(*new_m), v=ModelParams(*new_v)),
    )


def evaluate(
    params: ModelParams, lhat: SparseSym, x: np.ndarray, labels: np.ndarray, mask: np.ndarray
) -> float:
    """Fraction of masked nodes whose argmax logit matches the label; ties
    resolve to the lowest class index."""
    logits = forward(params, lhat, x)
    labels, mask_b = _check_labels_mask(logits, labels, mask)
    pred = logits.argmax(axis=1)
    return float((pred[mask_b] == labels[mask_b]).mean())


def param_count(params: ModelParams) -> int:
    return sum(getattr(params, f).size for f in _FIELDS)


def train(
    config: TrainConfig,
    graph: Graph,
    x: np.ndarray,
    labels: np.ndarray,
    splits,
) -> tuple[ModelParams, dict]:
    """Full-batch training loop.

    ``splits`` maps "train" and "valid" to boolean node masks. Tracks
    validation accuracy every epoch, keeps the best parameters seen, and
    stops once `patience` epochs pass without improvement. Returns the best
    parameters together with a history dict (per-epoch train loss, train and
    valid accuracy, best epoch index).
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    train_mask = np.asarray(splits["train"], dtype=bool)
    valid_mask = np.asarray(splits["valid"], dtype=bool)
    if not train_mask.any():
        raise ValueError("training mask selects no nodes")
    if not valid_mask.any():
        raise ValueError("validation mask selects no nodes")

    lhat = shifted_laplacian(normalized_laplacian(graph))
    n_classes = int(labels.max()) + 1
    params = init_params(
        x.shape[1], config.hidden, n_classes, config.degree, config.seed, config.conv_mode
    )
    state = init_adam(params)

    best = _tree_map(np.copy, params)
    best_acc = -1.0
    best_epoch = -1
    since_best = 0
    train_loss: list[float] = []
    train_acc: list[float] = []
    valid_acc: list[float] = []

    for epoch in range(config.max_epochs):
        loss, grads = backward(
            params, lhat, x, labels, train_mask, config.dropout, (config.seed, epoch)
        )
        params, state = adam_step(state, params, grads, config)
        acc = evaluate(params, lhat, x, labels, valid_mask)
        train_loss.append(loss)
        train_acc.append(evaluate(params, lhat, x, labels, train_mask))
        valid_acc.append(acc)
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best = _tree_map(np.copy, params)
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    history = {
        "train_loss": train_loss,
        "train_acc": train_acc,
        "valid_acc": valid_acc,
        "best_epoch": best_epoch,
        "best_valid_acc": best_acc,
        "epochs_run": len(train_loss),
    }
    return best, history
