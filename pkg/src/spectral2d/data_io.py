"""Dataset files, synthetic task generators, and canonical serialization.

All JSON leaving this package is canonical: keys sorted, floats printed with
17 significant digits, no whitespace variation. Identical inputs therefore
produce byte-identical files on every platform, which is what the
reproducibility checks diff against. Writes go through a temp file and an
atomic rename so readers never observe a partial file.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass

import numpy as np

from .graph_core import Graph, normalized_laplacian
from .model import ModelParams
from .spectral import eig_sym

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    # 17 significant digits round-trips every float64 exactly
    return format(float(x), ".17g")


def _canon(obj) -> str:
    if isinstance(obj, np.ndarray):
        return _canon(obj.tolist())
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if obj is None:
        return "null"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = []
        for k in sorted(obj):
            if not isinstance(k, str):
                raise TypeError(f"JSON object keys must be strings, got {k!r}")
            parts.append(json.dumps(k, ensure_ascii=False) + ":" + _canon(obj[k]))
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed float formatting, no
    insignificant whitespace, trailing newline."""
    return _canon(obj) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write text to ``path`` via a sibling temp file and an atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class Dataset:
    """A node-classification task: graph, features, labels and split masks."""

    graph: Graph
    x: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    valid_mask: np.ndarray
    test_mask: np.ndarray

    def __post_init__(self):
        n = self.graph.n_nodes
        if self.x.ndim != 2 or self.x.shape[0] != n:
            raise ValueError(f"features must be ({n}, K), got {self.x.shape}")
        for name in ("labels", "train_mask", "valid_mask", "test_mask"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be non-negative class indices")
        overlap = (
            (self.train_mask & self.valid_mask)
            | (self.train_mask & self.test_mask)
            | (self.valid_mask & self.test_mask)
        )
        if overlap.any():
            raise ValueError(f"split masks overlap at node {int(np.nonzero(overlap)[0][0])}")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def splits(self) -> dict:
        return {"train": self.train_mask, "valid": self.valid_mask, "test": self.test_mask}


def _parse_int(token: str, where: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ValueError(f"{where}: not an integer: {token!r}") from None


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"{where}: not a number: {token!r}") from None


def load_dataset(dir_path: str, index_base: int = 0) -> Dataset:
    """Read edges.tsv, features.csv, labels.csv and splits.json from a
    directory. ``index_base`` is subtracted from every node index on the way
    in (1 for one-based files). Malformed content raises an error naming the
    file and line; duplicate edges are dropped with a warning.
    """
    if index_base not in (0, 1):
        raise ValueError(f"index_base must be 0 or 1, got {index_base}")

    feat_path = os.path.join(dir_path, "features.csv")
    if not os.path.exists(feat_path):
        raise FileNotFoundError(f"missing file: {feat_path}")
    rows = []
    with open(feat_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            vals = [_parse_float(t, f"{feat_path}:{lineno}") for t in line.split(",")]
            if rows and len(vals) != len(rows[0]):
                raise ValueError(
                    f"{feat_path}:{lineno}: expected {len(rows[0])} columns, got {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise ValueError(f"{feat_path}: no feature rows")
    x = np.array(rows, dtype=np.float64)
    n = x.shape[0]

    lab_path = os.path.join(dir_path, "labels.csv")
    if not os.path.exists(lab_path):
        raise FileNotFoundError(f"missing file: {lab_path}")
    labels = []
    with open(lab_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            labels.append(_parse_int(line, f"{lab_path}:{lineno}"))
    if len(labels) != n:
        raise ValueError(f"{lab_path}: {len(labels)} labels for {n} feature rows")
    labels = np.array(labels, dtype=np.int64)
    if labels.min() < 0:
        raise ValueError(f"{lab_path}: negative label {int(labels.min())}")

    edge_path = os.path.join(dir_path, "edges.tsv")
    if not os.path.exists(edge_path):
        raise FileNotFoundError(f"missing file: {edge_path}")
    seen = set()
    edges = []
    with open(edge_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{edge_path}:{lineno}: expected two tab-separated columns")
            u = _parse_int(parts[0], f"{edge_path}:{lineno}") - index_base
            v = _parse_int(parts[1], f"{edge_path}:{lineno}") - index_base
            if u == v:
                raise ValueError(f"{edge_path}:{lineno}: self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"{edge_path}:{lineno}: node index out of range [0, {n})")
            key = (min(u, v), max(u, v))
            if key in seen:
                warnings.warn(f"{edge_path}:{lineno}: duplicate edge {key} dropped")
                continue
            seen.add(key)
            edges.append(key)

    split_path = os.path.join(dir_path, "splits.json")
    if not os.path.exists(split_path):
        raise FileNotFoundError(f"missing file: {split_path}")
    with open(split_path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{split_path}: malformed JSON: {e}") from None
    masks = {}
    for name in ("train", "valid", "test"):
        if name not in raw:
            raise ValueError(f"{split_path}: missing split {name!r}")
        mask = np.zeros(n, dtype=bool)
        for i in raw[name]:
            if not isinstance(i, int):
                raise ValueError(f"{split_path}: split {name!r} holds non-integer {i!r}")
            j = i - index_base
            if not 0 <= j < n:
                raise ValueError(f"{split_path}: split {name!r} index {i} out of range")
            mask[j] = True
        masks[name] = mask
    for a, b in (("train", "valid"), ("train", "test"), ("valid", "test")):
        both = masks[a] & masks[b]
        if both.any():
            raise ValueError(
                f"{split_path}: splits {a!r} and {b!r} overlap at node {int(np.nonzero(both)[0][0])}"
            )

    return Dataset(
        graph=Graph(n_nodes=n, edges=tuple(edges)),
        x=x,
        labels=labels,
        train_mask=masks["train"],
        valid_mask=masks["valid"],
        test_mask=masks["test"],
    )


def save_dataset(ds: Dataset, dir_path: str, index_base: int = 0) -> None:
    """Write the four dataset files; the exact bytes depend only on the
    dataset and index_base."""
    if index_base not in (0, 1):
        raise ValueError(f"index_base must be 0 or 1, got {index_base}")
    os.makedirs(dir_path, exist_ok=True)
    edge_lines = [f"{u + index_base}\t{v + index_base}" for u, v in ds.graph.edges]
    write_atomic(os.path.join(dir_path, "edges.tsv"), "\n".join(edge_lines) + "\n" if edge_lines else "")
    feat_lines = [",".join(_fmt_float(v) for v in row) for row in ds.x]
    write_atomic(os.path.join(dir_path, "features.csv"), "\n".join(feat_lines) + "\n")
    write_atomic(os.path.join(dir_path, "labels.csv"), "\n".join(str(int(v)) for v in ds.labels) + "\n")
    splits = {
        name: [int(i) + index_base for i in np.nonzero(mask)[0]]
        for name, mask in ds.splits.items()
    }
    write_atomic(os.path.join(dir_path, "splits.json"), canonical_json(splits))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a generated task.

    ``kind`` is "separable" (class-conditioned Gaussian features on a block
    graph, solvable by an MLP alone) or "cross_channel" (two channels of
    band-limited graph signals whose informative bands sit in opposite
    channels; ``noise`` is the amplitude of the out-of-band nuisance).
    """

    kind: str
    n_nodes: int = 400
    n_classes: int = 2
    blocks: int = 4
    p_intra: float = 0.15
    p_inter: float = 0.01
    feat_dim: int = 8
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("separable", "cross_channel"):
            raise ValueError(f"kind must be 'separable' or 'cross_channel', got {self.kind!r}")
        if self.n_nodes < 2:
            raise ValueError(f"n_nodes must be at least 2, got {self.n_nodes}")
        if not 1 <= self.blocks <= self.n_nodes:
            raise ValueError(f"blocks must lie in [1, n_nodes], got {self.blocks}")
        for name in ("p_intra", "p_inter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be at least 2, got {self.n_classes}")
        if self.feat_dim < 1:
            raise ValueError(f"feat_dim must be positive, got {self.feat_dim}")
        if self.noise < 0:
            raise ValueError(f"noise must be non-negative, got {self.noise}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.kind == "cross_channel":
            if self.feat_dim != 2:
                raise ValueError("cross_channel tasks use exactly 2 feature channels")
            if self.n_classes != 2:
                raise ValueError("cross_channel tasks are binary")
            if self.n_nodes < 20:
                raise ValueError("cross_channel tasks need at least 20 nodes")


def _sbm_graph(spec: SyntheticSpec, rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    n = spec.n_nodes
    block = (np.arange(n) * spec.blocks) // n
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], spec.p_intra, spec.p_inter)
    keep = rng.random(iu.size) < prob
    edge_set = {(int(a), int(b)) for a, b in zip(iu[keep], ju[keep])}
    degree = np.zeros(n, dtype=np.int64)
    for a, b in edge_set:
        degree[a] += 1
        degree[b] += 1
    # a node the sampler left isolated gets one deterministic ring edge
    for i in np.nonzero(degree == 0)[0]:
        j = (int(i) + 1) % n
        key = (min(int(i), j), max(int(i), j))
        if key not in edge_set:
            edge_set.add(key)
            degree[key[0]] += 1
            degree[key[1]] += 1
    return Graph(n_nodes=n, edges=tuple(sorted(edge_set))), block


def _split_masks(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = rng.permutation(n)
    n_train = int(round(0.6 * n))
    n_valid = int(round(0.2 * n))
    train = np.zeros(n, dtype=bool)
    valid = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    train[order[:n_train]] = True
    valid[order[n_train : n_train + n_valid]] = True
    test[order[n_train + n_valid :]] = True
    return train, valid, test


def _gen_cross_channel(spec: SyntheticSpec) -> tuple[Dataset, np.ndarray]:
    """Build the two-channel task and return it with the planted score.

    Channel 1 carries the label's low-band component plus a high-band
    nuisance of amplitude ``noise``; channel 2 carries the high-band
    component plus a low-band nuisance. The label is the sign of the sum of
    the two informative components, so any single filter shared across
    channels must trade signal against nuisance while channel-specific
    filters can keep both bands clean.
    """
    rng = np.random.default_rng(spec.seed)
    graph, _ = _sbm_graph(spec, rng)
    basis = eig_sym(normalized_laplacian(graph).to_dense())
    n = spec.n_nodes
    m = max(1, n // 10)
    low = basis.u[:, :m]
    high = basis.u[:, n - m :]

    alpha = rng.standard_normal(m)
    beta = rng.standard_normal(m)
    gamma = rng.standard_normal(m)
    delta = rng.standard_normal(m)

    score = low @ alpha + high @ beta
    x = np.column_stack([
        low @ alpha + spec.noise * (high @ gamma),
        spec.noise * (low @ delta) + high @ beta,
    ])
    labels = (score > 0).astype(np.int64)
    train, valid, test = _split_masks(n, rng)
    ds = Dataset(
        graph=graph, x=x, labels=labels,
        train_mask=train, valid_mask=valid, test_mask=test,
    )
    return ds, score


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Deterministic synthetic task for the given spec (seed included)."""
    if spec.kind == "cross_channel":
        return _gen_cross_channel(spec)[0]
    rng = np.random.default_rng(spec.seed)
    graph, block = _sbm_graph(spec, rng)
    labels = (block % spec.n_classes).astype(np.int64)
    centers = 3.0 * rng.standard_normal((spec.n_classes, spec.feat_dim))
    x = centers[labels] + spec.noise * rng.standard_normal((spec.n_nodes, spec.feat_dim))
    train, valid, test = _split_masks(spec.n_nodes, rng)
    return Dataset(
        graph=graph, x=x, labels=labels,
        train_mask=train, valid_mask=valid, test_mask=test,
    )


def _check_schema(doc: dict, path: str) -> None:
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ValueError(f"{path}: missing schema_version")
    v = doc["schema_version"]
    if v != SCHEMA_VERSION:
        raise ValueError(f"{path}: schema_version {v} not supported (expected {SCHEMA_VERSION})")


def save_report(path: str, report: dict) -> None:
    doc = dict(report)
    doc["schema_version"] = SCHEMA_VERSION
    write_atomic(path, canonical_json(doc))


def load_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: malformed JSON: {e}") from None
    _check_schema(doc, path)
    return doc


def save_checkpoint(path: str, params: ModelParams, config: dict, metrics: dict) -> None:
    """Model parameters plus a config echo and metrics, as canonical JSON."""
    theta = params.theta
    doc = {
        "schema_version": SCHEMA_VERSION,
        "dims": {
            "k": params.w1.shape[0],
            "h": params.w1.shape[1],
            "c": params.w2.shape[1],
            "d": theta.shape[-1] - 1,
            "conv_mode": "2d" if theta.ndim == 3 else "p1",
        },
        "params": {
            "w1": params.w1,
            "b1": params.b1,
            "w2": params.w2,
            "b2": params.b2,
            "theta": theta,
        },
        "config": config,
        "metrics": metrics,
    }
    write_atomic(path, canonical_json(doc))


def load_checkpoint(path: str) -> tuple[ModelParams, dict]:
    """Returns the stored parameters and the full document."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: malformed JSON: {e}") from None
    _check_schema(doc, path)
    try:
        raw = doc["params"]
        params = ModelParams(
            w1=np.array(raw["w1"], dtype=np.float64),
            b1=np.array(raw["b1"], dtype=np.float64),
            w2=np.array(raw["w2"], dtype=np.float64),
            b2=np.array(raw["b2"], dtype=np.float64),
            theta=np.array(raw["theta"], dtype=np.float64),
        )
    except KeyError as e:
        raise ValueError(f"{path}: missing checkpoint field {e}") from None
    return params, doc
