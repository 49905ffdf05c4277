import json
import os

import numpy as np
import pytest

from spectral2d.data_io import (
    Dataset,
    SyntheticSpec,
    _gen_cross_channel,
    canonical_json,
    gen_synthetic,
    load_checkpoint,
    load_dataset,
    load_report,
    save_checkpoint,
    save_dataset,
    save_report,
    write_atomic,
)
from spectral2d.graph_core import Graph, normalized_laplacian, shifted_laplacian
from spectral2d.model import TrainConfig, evaluate, init_params, train


def toy_dir(tmp_path, edges="0\t1\n1\t2\n", splits=None):
    d = tmp_path / "toy"
    d.mkdir()
    (d / "edges.tsv").write_text(edges)
    (d / "features.csv").write_text("1.0,2.0\n3.0,4.0\n5.0,6.0\n")
    (d / "labels.csv").write_text("0\n1\n0\n")
    if splits is None:
        splits = {"train": [0], "valid": [1], "test": [2]}
    (d / "splits.json").write_text(json.dumps(splits))
    return str(d)


def test_canonical_json_sorted_and_fixed_floats():
    doc = {"b": 1, "a": [0.1, 1.0, True, None, "x"]}
    text = canonical_json(doc)
    assert text == '{"a":[0.10000000000000001,1,true,null,"x"],"b":1}\n'


def test_canonical_json_rejects_non_finite():
    with pytest.raises(ValueError):
        canonical_json({"v": float("inf")})


def test_canonical_json_numpy_values():
    text = canonical_json({"m": np.array([[1.5, 2.0]]), "n": np.int64(3)})
    assert text == '{"m":[[1.5,2]],"n":3}\n'


def test_write_atomic_replaces_content(tmp_path):
    p = str(tmp_path / "out.txt")
    write_atomic(p, "first\n")
    write_atomic(p, "second\n")
    with open(p) as fh:
        assert fh.read() == "second\n"
    assert [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")] == []


def test_load_toy_dataset(tmp_path):
    ds = load_dataset(toy_dir(tmp_path))
    assert ds.graph.n_nodes == 3
    assert ds.graph.edges == ((0, 1), (1, 2))
    assert ds.x.shape == (3, 2)
    assert ds.n_classes == 2
    assert ds.train_mask.sum() == 1


def test_load_dataset_one_based(tmp_path):
    d = toy_dir(tmp_path, edges="1\t2\n2\t3\n", splits={"train": [1], "valid": [2], "test": [3]})
    ds = load_dataset(d, index_base=1)
    assert ds.graph.edges == ((0, 1), (1, 2))
    assert bool(ds.train_mask[0])


def test_load_dataset_self_loop_names_line(tmp_path):
    d = toy_dir(tmp_path, edges="0\t1\n2\t2\n")
    with pytest.raises(ValueError, match=r"edges\.tsv:2.*self-loop"):
        load_dataset(d)


def test_load_dataset_bad_feature_names_line(tmp_path):
    d = toy_dir(tmp_path)
    with open(os.path.join(d, "features.csv"), "w") as fh:
        fh.write("1.0,2.0\n3.0,oops\n5.0,6.0\n")
    with pytest.raises(ValueError, match=r"features\.csv:2"):
        load_dataset(d)


def test_load_dataset_duplicate_edge_warns(tmp_path):
    d = toy_dir(tmp_path, edges="0\t1\n1\t0\n1\t2\n")
    with pytest.warns(UserWarning, match="duplicate edge"):
        ds = load_dataset(d)
    assert ds.graph.edges == ((0, 1), (1, 2))


def test_load_dataset_overlapping_splits(tmp_path):
    d = toy_dir(tmp_path, splits={"train": [0, 1], "valid": [1], "test": [2]})
    with pytest.raises(ValueError, match="overlap"):
        load_dataset(d)


def test_load_dataset_out_of_range_edge(tmp_path):
    d = toy_dir(tmp_path, edges="0\t9\n")
    with pytest.raises(ValueError, match=r"edges\.tsv:1.*out of range"):
        load_dataset(d)


def test_load_dataset_missing_file(tmp_path):
    d = toy_dir(tmp_path)
    os.unlink(os.path.join(d, "labels.csv"))
    with pytest.raises(FileNotFoundError, match="labels.csv"):
        load_dataset(d)


def test_dataset_roundtrip_bytes(tmp_path):
    spec = SyntheticSpec(kind="separable", n_nodes=30, blocks=3, feat_dim=4, seed=5)
    ds = gen_synthetic(spec)
    d1 = str(tmp_path / "a")
    d2 = str(tmp_path / "b")
    save_dataset(ds, d1)
    save_dataset(load_dataset(d1), d2)
    for name in ("edges.tsv", "features.csv", "labels.csv", "splits.json"):
        with open(os.path.join(d1, name), "rb") as fa, open(os.path.join(d2, name), "rb") as fb:
            assert fa.read() == fb.read(), name


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(kind="mystery")
    with pytest.raises(ValueError):
        SyntheticSpec(kind="separable", p_intra=1.5)
    with pytest.raises(ValueError):
        SyntheticSpec(kind="cross_channel", feat_dim=3)
    with pytest.raises(ValueError):
        SyntheticSpec(kind="cross_channel", feat_dim=2, n_classes=3)
    with pytest.raises(ValueError):
        SyntheticSpec(kind="separable", blocks=0)


def test_gen_deterministic():
    spec = SyntheticSpec(kind="separable", n_nodes=40, seed=11)
    a = gen_synthetic(spec)
    b = gen_synthetic(spec)
    assert a.graph.edges == b.graph.edges
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.train_mask, b.train_mask)


def test_gen_no_isolated_nodes():
    spec = SyntheticSpec(kind="separable", n_nodes=50, p_intra=0.02, p_inter=0.0, seed=3)
    ds = gen_synthetic(spec)
    degree = np.zeros(50)
    for u, v in ds.graph.edges:
        degree[u] += 1
        degree[v] += 1
    assert degree.min() >= 1


def test_gen_split_fractions():
    ds = gen_synthetic(SyntheticSpec(kind="separable", n_nodes=100, seed=1))
    assert ds.train_mask.sum() == 60
    assert ds.valid_mask.sum() == 20
    assert ds.test_mask.sum() == 20
    assert (ds.train_mask | ds.valid_mask | ds.test_mask).all()


def test_separable_noise_free_trains_to_full_accuracy():
    spec = SyntheticSpec(kind="separable", n_nodes=60, blocks=2, feat_dim=4, noise=0.0, seed=2)
    ds = gen_synthetic(spec)
    cfg = TrainConfig(
        learning_rate=0.02, weight_decay=0.0, dropout=0.0, max_epochs=150,
        patience=150, seed=2, degree=0, hidden=8,
    )
    _, history = train(cfg, ds.graph, ds.x, ds.labels, ds.splits)
    assert 1.0 in history["train_acc"]


def test_cross_channel_planted_rule_is_consistent():
    spec = SyntheticSpec(kind="cross_channel", feat_dim=2, n_nodes=400, noise=2.0, seed=7)
    ds, score = _gen_cross_channel(spec)
    assert np.array_equal(ds.labels, (score > 0).astype(np.int64))
    assert ds.labels.sum() > 100  # both classes well represented
    assert (1 - ds.labels).sum() > 100
    # the two channels carry the two halves of the score in opposite bands
    assert ds.x.shape == (400, 2)


def test_report_roundtrip_identical_bytes(tmp_path):
    p = str(tmp_path / "report.json")
    save_report(p, {"values": [1.5, 2.25], "name": "demo"})
    doc = load_report(p)
    p2 = str(tmp_path / "again.json")
    save_report(p2, {k: v for k, v in doc.items() if k != "schema_version"})
    with open(p, "rb") as fa, open(p2, "rb") as fb:
        assert fa.read() == fb.read()


def test_report_future_schema_rejected(tmp_path):
    p = str(tmp_path / "future.json")
    with open(p, "w") as fh:
        fh.write('{"schema_version": 99}')
    with pytest.raises(ValueError, match="schema_version 99"):
        load_report(p)


def test_report_malformed_json(tmp_path):
    p = str(tmp_path / "bad.json")
    with open(p, "w") as fh:
        fh.write("{nope")
    with pytest.raises(ValueError, match="malformed"):
        load_report(p)


def test_checkpoint_roundtrip_preserves_evaluation(tmp_path):
    rng = np.random.default_rng(8)
    spec = SyntheticSpec(kind="separable", n_nodes=30, feat_dim=4, seed=8)
    ds = gen_synthetic(spec)
    params = init_params(4, 6, 2, 3, seed=8)
    lhat = shifted_laplacian(normalized_laplacian(ds.graph))
    before = evaluate(params, lhat, ds.x, ds.labels, ds.test_mask)
    p = str(tmp_path / "ckpt.json")
    save_checkpoint(p, params, {"seed": 8}, {"test_acc": before})
    loaded, doc = load_checkpoint(p)
    assert doc["config"]["seed"] == 8
    assert doc["dims"]["conv_mode"] == "2d"
    for f in ("w1", "b1", "w2", "b2", "theta"):
        assert np.array_equal(getattr(loaded, f), getattr(params, f))
    assert evaluate(loaded, lhat, ds.x, ds.labels, ds.test_mask) == before
