"""Command-line entry point.

Subcommands cover the full pipeline: dataset generation, training,
property verification, the adversarial case lab, and two standalone
utilities (spectrum dump, filter application). Every primary output is
written atomically in a canonical byte format, so identical invocations
produce identical files.

Exit codes: 0 success, 1 verification or assertion failure, 2 usage or
I/O error.

The numeric imports happen inside the command handlers, after the
SPECTRAL2D_THREADS cap (if set) has been copied into the BLAS/OpenMP
environment variables; importing this module stays cheap.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def _apply_thread_cap() -> None:
    cap = os.environ.get("SPECTRAL2D_THREADS")
    if cap is None:
        return
    if not cap.isdigit() or int(cap) < 1:
        raise ValueError(f"SPECTRAL2D_THREADS must be a positive integer, got {cap!r}")
    for var in _THREAD_VARS:
        os.environ[var] = cap


def _float_cell(v: float) -> str:
    return format(float(v), ".17g")


def _write_csv(path: str, header: list, rows: list) -> None:
    from .data_io import write_atomic

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    write_atomic(path, buf.getvalue())


def _resolve_dataset(args):
    """Dataset from --data or from a synthetic spec; exactly one source."""
    from .data_io import SyntheticSpec, gen_synthetic, load_dataset

    if args.data is not None and args.gen_kind is not None:
        raise ValueError("--data and --gen-kind are mutually exclusive")
    if args.data is not None:
        return load_dataset(args.data, index_base=args.index_base)
    if args.gen_kind is not None:
        spec = SyntheticSpec(
            kind=args.gen_kind,
            n_nodes=args.nodes,
            n_classes=args.classes,
            feat_dim=2 if args.gen_kind == "cross_channel" else 8,
            seed=args.seed,
        )
        return gen_synthetic(spec)
    raise ValueError("a dataset source is required: --data DIR or --gen-kind KIND")


def cmd_gen(args) -> int:
    from .data_io import save_dataset

    ds = _resolve_dataset(args)
    save_dataset(ds, args.out, index_base=args.index_base)
    print(f"wrote {ds.graph.n_nodes} nodes, {len(ds.graph.edges)} edges to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .data_io import save_checkpoint, save_report
    from .graph_core import normalized_laplacian, shifted_laplacian
    from .model import TrainConfig, evaluate, train

    ds = _resolve_dataset(args)
    config = TrainConfig(
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        dropout=args.dropout,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        degree=args.degree,
        hidden=args.hidden,
        conv_mode=args.conv_mode,
    )
    params, history = train(config, ds.graph, ds.x, ds.labels, ds.splits)
    lhat = shifted_laplacian(normalized_laplacian(ds.graph))
    test_acc = evaluate(params, lhat, ds.x, ds.labels, ds.test_mask)

    os.makedirs(args.out, exist_ok=True)
    config_doc = dataclasses.asdict(config)
    metrics = {
        "train_loss": history["train_loss"],
        "valid_acc": history["valid_acc"],
        "test_acc": test_acc,
        "seed": args.seed,
        "config": config_doc,
    }
    save_report(os.path.join(args.out, "metrics.json"), metrics)
    save_checkpoint(
        os.path.join(args.out, "checkpoint.json"), params, config_doc, {"test_acc": test_acc}
    )
    print(
        f"trained {history['epochs_run']} epochs, best valid acc "
        f"{history['best_valid_acc']:.4f} at epoch {history['best_epoch']}, "
        f"test acc {test_acc:.4f}"
    )
    return 0


def cmd_verify(args) -> int:
    from .verify import run

    results = run(args.scope)
    width = max(len(r.name) for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.name:{width}s}  {r.detail}")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


def cmd_lab(args) -> int:
    from .failure_lab import run_lab, standard_cases

    os.makedirs(args.out, exist_ok=True)
    report = run_lab(
        standard_cases(),
        out_json=os.path.join(args.out, "report.json"),
        out_csv=os.path.join(args.out, "report.csv"),
        restarts=args.restarts,
        steps=args.steps,
    )
    bad = 0
    for row in report["cases"]:
        print(f"{row['verdict']:4s}  {row['name']}")
        bad += row["verdict"] != "ok"
    print(f"{len(report['cases']) - bad}/{len(report['cases'])} cases ok")
    return 0 if bad == 0 else 1


def cmd_eig(args) -> int:
    from .graph_core import normalized_laplacian
    from .spectral import eig_sym

    ds = _resolve_dataset(args)
    basis = eig_sym(normalized_laplacian(ds.graph).to_dense())
    n = basis.dim
    if args.vectors:
        header = ["lambda"] + [f"u{i}" for i in range(n)]
        rows = [
            [_float_cell(basis.lam[k])] + [_float_cell(v) for v in basis.u[:, k]]
            for k in range(n)
        ]
    else:
        header = ["lambda"]
        rows = [[_float_cell(v)] for v in basis.lam]
    _write_csv(args.out, header, rows)
    print(f"wrote {n} eigenvalues to {args.out}")
    return 0


def cmd_filter(args) -> int:
    import numpy as np

    from .chebyshev import conv2d_cheb
    from .data_io import load_checkpoint
    from .graph_core import normalized_laplacian, shifted_laplacian

    ds = _resolve_dataset(args)
    params, _ = load_checkpoint(args.checkpoint)
    theta = params.theta
    c = ds.x.shape[1]
    if theta.ndim == 1:
        # shared scalar filter applies to any channel count
        full = np.zeros((c, c, theta.shape[0]))
        for i in range(c):
            full[i, i, :] = theta
        theta = full
    elif theta.shape[0] != c:
        raise ValueError(
            f"checkpoint filters {theta.shape[0]} channels but the dataset has {c}"
        )
    lhat = shifted_laplacian(normalized_laplacian(ds.graph))
    out = conv2d_cheb(lhat, ds.x, theta)
    _write_csv(
        args.out,
        [f"f{j}" for j in range(out.shape[1])],
        [[_float_cell(v) for v in row] for row in out],
    )
    print(f"wrote filtered signals ({out.shape[0]} x {out.shape[1]}) to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral2d",
        description="Two-dimensional spectral graph convolution toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--data", help="dataset directory to load")
    source.add_argument(
        "--gen-kind", choices=["separable", "cross_channel"], help="generate a synthetic task"
    )
    source.add_argument("--nodes", type=int, default=400, help="synthetic node count")
    source.add_argument("--classes", type=int, default=2, help="synthetic class count")
    source.add_argument("--seed", type=int, default=0, help="generation / training seed")
    source.add_argument(
        "--index-base", type=int, default=0, choices=[0, 1], help="node index base in files"
    )

    p = sub.add_parser("gen", parents=[source], help="write a synthetic dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", parents=[source], help="train a model and save results")
    p.add_argument("--lr", type=float, default=0.01, help="learning rate")
    p.add_argument("--weight-decay", type=float, default=5e-4, help="L2 coefficient")
    p.add_argument("--dropout", type=float, default=0.5, help="dropout rate")
    p.add_argument("--degree", type=int, default=10, help="polynomial degree D")
    p.add_argument("--hidden", type=int, default=64, help="hidden width H")
    p.add_argument("--epochs", type=int, default=2000, help="epoch cap")
    p.add_argument("--patience", type=int, default=200, help="early-stopping patience")
    p.add_argument(
        "--conv-mode", choices=["2d", "p1"], default="2d", help="full grid or shared filter"
    )
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("verify", help="run the library property checks")
    p.add_argument(
        "scope",
        nargs="?",
        default="all",
        choices=["all", "spectral", "paradigms", "chebyshev", "model"],
    )
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("lab", help="run the adversarial case suite")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--restarts", type=int, default=50, help="optimizer restarts per objective")
    p.add_argument("--steps", type=int, default=2000, help="descent steps per restart")
    p.set_defaults(fn=cmd_lab)

    p = sub.add_parser("eig", parents=[source], help="dump the Laplacian spectrum as CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--vectors", action="store_true", help="include eigenvector components")
    p.set_defaults(fn=cmd_eig)

    p = sub.add_parser("filter", parents=[source], help="apply a saved filter to features")
    p.add_argument("checkpoint", help="checkpoint JSON from train")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(fn=cmd_filter)

    return parser


def main(argv=None) -> int:
    try:
        _apply_thread_cap()
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
