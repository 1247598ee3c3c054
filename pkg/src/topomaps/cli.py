"""Command line interface.

Subcommands: train, generate, export-grid, eval, inspect. Exit codes:
0 on success (including a training run that stops at the iteration cap,
which is reported but is not an error), 2 on configuration errors, 3 on
data format errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys

import numpy as np

from .dataio import (
    ModelFile,
    export_prototype_grid,
    export_sample_sheet,
    load_anchors,
    load_csv,
    load_idx,
    load_model,
    load_pgm_dir,
    save_model,
    write_history_csv,
)
from .errors import ConfigurationError, DataFormatError
from .generator import LatentQuery, generate
from .grid import Dataset, GridTopology, TrainingSchedule
from .operators import WtaKind, find_winners
from .training import anchor_consistency, quantization_error, train_batch, train_online

ALGOS = ("kmeans", "som", "stm", "lvq")


def _parse_grid(spec: str) -> GridTopology:
    m = re.fullmatch(r"(\d+)(?:[xX](\d+))?", spec.strip())
    if not m:
        raise ConfigurationError(
            f"bad grid spec {spec!r}; use 'K' for a 1D grid or 'RxC' for 2D"
        )
    if m.group(2) is None:
        return GridTopology((int(m.group(1)),))
    return GridTopology((int(m.group(1)), int(m.group(2))))


def _parse_tile(spec: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)[xX](\d+)", spec.strip())
    if not m:
        raise ConfigurationError(f"bad tile spec {spec!r}; use 'RxC'")
    return int(m.group(1)), int(m.group(2))


def _parse_point(spec: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in spec.split(","))
    except ValueError:
        raise ConfigurationError(
            f"bad point {spec!r}; use comma-separated numbers like '4.5,3'"
        ) from None


def _load_dataset(args) -> Dataset:
    path = str(args.data)
    if os.path.isdir(path):
        if getattr(args, "labels", None) or getattr(args, "label_column", None):
            raise ConfigurationError("a PGM directory carries no labels")
        return load_pgm_dir(path)
    if path.lower().endswith(".csv"):
        if getattr(args, "labels", None):
            raise ConfigurationError(
                "--labels is for IDX data; use --label-column with CSV"
            )
        return load_csv(path, label_column=args.label_column)
    if getattr(args, "label_column", None):
        raise ConfigurationError(
            "--label-column is for CSV data; use --labels with IDX"
        )
    return load_idx(path, labels_path=args.labels)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True,
                   help="dataset path; .csv is parsed as headed CSV, a directory "
                        "as raw PGM images, anything else as IDX")
    p.add_argument("--labels", default=None,
                   help="IDX label file matching --data (default: none)")
    p.add_argument("--label-column", default=None,
                   help="CSV column to use as the label (default: none)")


def cmd_train(args) -> int:
    if args.algo == "kmeans":
        if args.k is not None and args.grid is not None:
            raise ConfigurationError("give --k or --grid, not both")
        if args.k is not None:
            if args.k < 1:
                raise ConfigurationError("--k must be at least 1")
            topo = GridTopology((args.k,))
        elif args.grid is not None:
            topo = _parse_grid(args.grid)
        else:
            raise ConfigurationError("kmeans needs --k or --grid")
    else:
        if args.k is not None:
            raise ConfigurationError("--k is only for kmeans; use --grid")
        if args.grid is None:
            raise ConfigurationError(f"--grid is required for --algo {args.algo}")
        topo = _parse_grid(args.grid)

    mode = args.mode or ("online" if args.algo == "lvq" else "batch")
    if args.algo == "lvq" and mode == "batch":
        raise ConfigurationError("lvq trains online only; use --mode online")

    data = _load_dataset(args)

    anchors = None
    if args.algo in ("stm", "lvq"):
        if args.anchors is None:
            raise ConfigurationError(f"--anchors is required for --algo {args.algo}")
        anchors = load_anchors(args.anchors, topo)
    elif args.anchors is not None:
        raise ConfigurationError(f"--anchors is not used by --algo {args.algo}")

    sched = TrainingSchedule(
        eta_init=args.eta,
        sigma_r_init=args.sigma_r,
        sigma_t_init=args.sigma_t,
        tau=args.tau,
        epochs=args.epochs,
        epsilon=args.epsilon,
        max_batch_iters=args.max_iters,
        seed=args.seed,
    ).resolve(topo)

    if args.algo == "kmeans":
        kind = WtaKind.kmeans()
    elif args.algo == "som":
        kind = WtaKind.som()
    elif args.algo == "stm":
        kind = WtaKind.stm(sigma_t=args.sigma_t)
    else:
        kind = WtaKind.lvq()

    trainer = train_batch if mode == "batch" else train_online
    cb, history = trainer(data, topo, kind, anchors, sched, threads=args.threads)

    model = ModelFile(
        cb, args.algo,
        sigma_r=sched.sigma_r_init,
        sigma_t=args.sigma_t if args.algo == "stm" else None,
        seed=args.seed,
        anchors=anchors,
    )
    save_model(model, args.out)

    print(f"algorithm: {args.algo} ({mode})")
    print(f"grid: {'x'.join(str(d) for d in topo.dims)} ({topo.unit_count} units)")
    print(f"patterns: {data.n} x {data.m}")
    if mode == "batch":
        state = "converged" if history.converged else "stopped at iteration cap"
        print(f"iterations: {len(history)} ({state})")
    else:
        print(f"epochs: {len(history)}")
    if len(history):
        print(f"final energy: {history.records[-1].energy:.6g}")
        print(f"final movement: {history.records[-1].movement:.6g}")
    print(f"quantization error: {quantization_error(data, cb):.6g}")
    if anchors is not None and data.labels is not None:
        print(f"anchor consistency: {anchor_consistency(data, cb, anchors):.6g}")
    print(f"model: {args.out}")
    if not args.no_history:
        hist_path = str(args.out) + ".history.csv"
        write_history_csv(history, hist_path)
        print(f"history: {hist_path}")
    return 0


def cmd_generate(args) -> int:
    model = load_model(args.model)
    cb = model.codebook
    points: list[tuple[float, ...]] = []
    if args.at:
        points.extend(_parse_point(spec) for spec in args.at)
    if args.random:
        rng = np.random.default_rng(args.seed)
        hi = np.asarray(cb.topology.dims, dtype=float) - 1.0
        draws = rng.uniform(0.0, hi, size=(args.random, cb.topology.ndim))
        points.extend(tuple(p) for p in draws)
    if not points:
        raise ConfigurationError("nothing to generate; give --at and/or --random")

    rows = []
    for pt in points:
        rows.append(generate(LatentQuery(pt, args.sigma, args.normalize), cb))
    out = np.stack(rows)

    ndim = cb.topology.ndim
    with open(args.out, "w", newline="") as f:
        header = [f"q{i}" for i in range(ndim)] + [f"x{i}" for i in range(cb.m)]
        f.write(",".join(header) + "\n")
        for pt, row in zip(points, out):
            cells = [repr(float(v)) for v in pt] + [repr(float(v)) for v in row]
            f.write(",".join(cells) + "\n")
    print(f"generated {out.shape[0]} pattern(s) of width {cb.m}: {args.out}")

    if args.pgm:
        if args.tile:
            tr, tc = _parse_tile(args.tile)
        else:
            side = int(round(cb.m ** 0.5))
            if side * side == cb.m:
                tr, tc = side, side
            else:
                tr, tc = 1, cb.m
        export_sample_sheet(out, tr, tc, args.pgm)
        print(f"sheet: {args.pgm}")
    return 0


def cmd_export_grid(args) -> int:
    model = load_model(args.model)
    tr, tc = _parse_tile(args.tile)
    export_prototype_grid(model.codebook, tr, tc, args.out)
    print(f"prototype sheet: {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    cb = model.codebook
    data = _load_dataset(args)
    qe = quantization_error(data, cb)
    print(f"quantization error: {qe:.6g}")

    lines = [("metric", "label", "unit", "value")]
    lines.append(("metric", "quantization_error", "", repr(qe)))

    consistency = None
    if data.labels is not None and model.anchors is not None:
        consistency = anchor_consistency(data, cb, model.anchors)
        print(f"anchor consistency: {consistency:.6g}")
        lines.append(("metric", "anchor_consistency", "", repr(consistency)))

    if data.labels is not None:
        winners = find_winners(data.patterns, cb)
        print("winner histogram by label:")
        for label in sorted(set(data.labels)):
            mask = np.array([l == label for l in data.labels])
            units, counts = np.unique(winners[mask], return_counts=True)
            order = np.argsort(-counts)
            top = ", ".join(
                f"unit {units[i]} x{counts[i]}" for i in order[:5]
            )
            print(f"  {label}: {int(mask.sum())} patterns; top units: {top}")
            for u, c in zip(units, counts):
                lines.append(("histogram", label, str(int(u)), str(int(c))))

    with open(args.out, "w", newline="") as f:
        for row in lines:
            f.write(",".join(row) + "\n")
    print(f"report: {args.out}")
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    topo = model.codebook.topology
    print(f"model: {args.model}")
    print(f"kind: {model.kind_name}")
    print(f"grid: {'x'.join(str(d) for d in topo.dims)} ({topo.unit_count} units)")
    print(f"input dimension: {model.codebook.m}")
    print(f"sigma_r: {model.sigma_r if model.sigma_r is not None else 'unset'}")
    print(f"sigma_t: {model.sigma_t if model.sigma_t is not None else 'unset'}")
    print(f"seed: {model.seed}")
    if model.anchors is None:
        print("anchors: none")
    else:
        print(f"anchors: {len(model.anchors)}")
        for label in model.anchors.labels:
            coord = ", ".join(f"{v:g}" for v in model.anchors.coordinate_for(label))
            print(f"  {label}: ({coord})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topomaps",
        description="Train and use winner-takes-all maps: k-means, SOM, "
                    "supervised topological maps, and LVQ.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a map and save it")
    p.add_argument("--algo", required=True, choices=ALGOS)
    p.add_argument("--mode", choices=("batch", "online"), default=None,
                   help="training mode (default: batch, except lvq which is online)")
    p.add_argument("--grid", default=None,
                   help="grid spec, 'K' for 1D or 'RxC' for 2D (no default)")
    p.add_argument("--k", type=int, default=None,
                   help="kmeans shorthand for --grid K (no default)")
    _add_data_flags(p)
    p.add_argument("--anchors", default=None,
                   help="anchor file, required for stm and lvq (default: none)")
    p.add_argument("--eta", type=float, default=0.1,
                   help="initial learning rate (default: 0.1)")
    p.add_argument("--sigma-r", type=float, default=None,
                   help="initial neighborhood radius (default: half the largest grid extent)")
    p.add_argument("--sigma-t", type=float, default=2.0,
                   help="label anchor radius, not annealed (default: 2.0)")
    p.add_argument("--tau", type=float, default=None,
                   help="annealing time constant (default: epochs / 4)")
    p.add_argument("--epochs", type=int, default=100,
                   help="online training epochs (default: 100)")
    p.add_argument("--epsilon", type=float, default=1e-4,
                   help="batch convergence threshold on summed movement (default: 1e-4)")
    p.add_argument("--max-iters", type=int, default=500,
                   help="batch iteration cap (default: 500)")
    p.add_argument("--seed", type=int, default=0,
                   help="RNG seed for init and shuffling (default: 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for batch passes; never changes results (default: 1)")
    p.add_argument("--out", default="model.stm",
                   help="output model path (default: model.stm)")
    p.add_argument("--no-history", action="store_true",
                   help="skip writing <out>.history.csv (default: write it)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="read patterns out of a trained map")
    p.add_argument("--model", required=True, help="trained model path")
    p.add_argument("--at", action="append", default=None, metavar="COORD",
                   help="latent point like '4.5,3' (repeatable; default: none)")
    p.add_argument("--random", type=int, default=0, metavar="N",
                   help="additionally sample N uniform latent points (default: 0)")
    p.add_argument("--sigma", type=float, default=1.0,
                   help="interpolation radius (default: 1.0)")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="rescale activations to sum to 1 (default: on)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --random points (default: 0)")
    p.add_argument("--out", default="generated.csv",
                   help="output CSV path (default: generated.csv)")
    p.add_argument("--pgm", default=None,
                   help="also write the patterns as a tiled PGM sheet (default: off)")
    p.add_argument("--tile", default=None,
                   help="tile shape 'RxC' for --pgm (default: square if possible, else 1xM)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("export-grid", help="render all prototypes as one PGM sheet")
    p.add_argument("--model", required=True, help="trained model path")
    p.add_argument("--tile", required=True,
                   help="tile shape 'RxC' with R*C equal to the input dimension")
    p.add_argument("--out", default="grid.pgm",
                   help="output PGM path (default: grid.pgm)")
    p.set_defaults(func=cmd_export_grid)

    p = sub.add_parser("eval", help="score a dataset against a trained map")
    p.add_argument("--model", required=True, help="trained model path")
    _add_data_flags(p)
    p.add_argument("--out", default="eval-report.csv",
                   help="machine-readable report path (default: eval-report.csv)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="print a model file's header")
    p.add_argument("model", help="model path")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 for --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    raise SystemExit(main())
