"""Command-line entry point.

    driftlink stats    --dataset contacts.tsv --format uvt
    driftlink predict  --dataset contacts.tsv --index WSD --top-k 50
    driftlink evaluate --dataset contacts.tsv --protocol static-random --delete-ratio 0,0.1,0.2
    driftlink sweep-iterations --dataset contacts.tsv --iterations 0..5

Every option may also come from a ``--config`` file of ``key = value``
lines (keys are the long option names, ``-`` or ``_`` both accepted).
Flags given on the command line win over the file.

Exit codes: 0 ok, 1 usage, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from .drift import MAX_ITERATIONS, SYMMETRIZATIONS, TEMPORAL_MODES, DriftConfig, drift_iterate
from .evaluation import (DEFAULT_AUC_SAMPLES, PROTOCOLS, REPORT_FIELDS, EvaluationError, _fmt,
                         rank_non_observed, run_experiment, summarize, sweep_iterations,
                         write_summary_csv, write_sweep_csv, write_timings_csv)
from .graph import (AGGREGATIONS, EdgeListError, EdgeListFormat, GraphError, build_graph,
                    giant_component, read_edge_list)
from .similarity import DEFAULT_EPSILON, INDEX_NAMES, IndexKind
from .stats import network_stats
from .synthetic import generate_synthetic

OUT_DIR_ENV = "DRIFTLINK_OUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# value parsers

def _index_list(text: str) -> tuple[str, ...]:
    names = tuple(p.strip().upper() for p in str(text).split(",") if p.strip())
    if not names:
        raise argparse.ArgumentTypeError("no index given")
    for name in names:
        if name not in INDEX_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown index {name!r}; valid names: {', '.join(INDEX_NAMES)}")
    return names


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(p) for p in str(text).split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _int_range(text: str) -> tuple[int, ...]:
    """``0..5`` (inclusive) or ``0,1,3``."""
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = tuple(range(int(a), int(b) + 1))
        else:
            vals = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range like 0..5, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty range")
    if min(vals) < 0 or max(vals) > MAX_ITERATIONS:
        raise argparse.ArgumentTypeError(f"iterations must lie in 0..{MAX_ITERATIONS}")
    return vals


def _bounded_int(lo: int, hi: int | None = None):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo or (hi is not None and v > hi):
            raise argparse.ArgumentTypeError(f"{v} outside {lo}..{hi if hi is not None else 'inf'}")
        return v
    return parse


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return v


def _synthetic(text: str) -> tuple:
    """``NODES:EDGES_PER_NODE[:TRIAD_PROB[:INTERNAL_PROB]]``."""
    parts = str(text).split(":")
    try:
        if not 2 <= len(parts) <= 4:
            raise ValueError
        return (int(parts[0]), int(parts[1])) + tuple(float(p) for p in parts[2:])
    except ValueError:
        raise argparse.ArgumentTypeError(
            "expected NODES:EDGES_PER_NODE[:TRIAD_PROB[:INTERNAL_PROB]]") from None


# ---------------------------------------------------------------------------
# parser

def _common_options(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("input")
    src.add_argument("--config", help="key = value file with option defaults")
    src.add_argument("--dataset", help="edge list path")
    src.add_argument("--synthetic", type=_synthetic, metavar="N:M[:TRIAD[:INTERNAL]]",
                     help="generate a preferential-attachment stream instead of reading --dataset")
    src.add_argument("--format", default="uvwt",
                     help="column roles: u, v, w (weight), t (time), - (skip); default uvwt")
    src.add_argument("--delimiter", default=None, help="column separator (default: whitespace)")
    src.add_argument("--aggregation", choices=AGGREGATIONS, default=None,
                     help="merging of repeated interactions")
    src.add_argument("--seed", type=int, default=0, help="master seed")
    src.add_argument("--out-dir", default=os.environ.get(OUT_DIR_ENV, "driftlink-out"),
                     help=f"output directory (default ${OUT_DIR_ENV} or ./driftlink-out)")

    model = p.add_argument_group("model")
    model.add_argument("--index", type=_index_list, default=INDEX_NAMES,
                       help=f"comma-separated subset of {','.join(INDEX_NAMES)}")
    model.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    model.add_argument("--drift-iterations", type=_bounded_int(0, MAX_ITERATIONS), default=3)
    model.add_argument("--symmetrization", choices=SYMMETRIZATIONS, default="average")
    model.add_argument("--temporal", choices=TEMPORAL_MODES, default="use-timestamps")
    model.add_argument("--workers", type=_bounded_int(1), default=1)


def _eval_options(p: argparse.ArgumentParser, protocol: str) -> None:
    ev = p.add_argument_group("evaluation")
    ev.add_argument("--protocol", choices=PROTOCOLS, default=protocol)
    ev.add_argument("--train-fraction", type=_fraction, default=0.9)
    ev.add_argument("--delete-ratio", type=_float_list, default=(0.0,),
                    help="comma-separated deletion ratios, e.g. 0,0.1,0.2")
    ev.add_argument("--trials", type=_bounded_int(1), default=15)
    ev.add_argument("--auc-samples", type=_bounded_int(1), default=DEFAULT_AUC_SAMPLES)
    ev.add_argument("--auc-method", choices=("sampled", "exact"), default="sampled")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="driftlink", description="Weighted link prediction with position drift.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("stats", help="structure of the giant component")
    _common_options(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("predict", help="rank non-observed pairs of the whole graph")
    _common_options(p)
    p.add_argument("--top-k", type=_bounded_int(0), default=100)
    p.add_argument("--output", help="output file, '-' for stdout (default OUT_DIR/predictions.csv)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="split, delete, drift, score and measure")
    _common_options(p)
    _eval_options(p, "static-random")
    p.add_argument("--no-undrifted", action="store_true",
                   help="score only the drifted graph")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-iterations", help="metrics against the number of drift iterations")
    _common_options(p)
    _eval_options(p, "evolving-temporal")
    p.add_argument("--iterations", type=_int_range, default=tuple(range(6)))
    p.set_defaults(func=cmd_sweep_iterations)
    return parser


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, config: dict[str, str], path) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", "func")}
    defaults = {}
    for key, raw in config.items():
        act = actions.get(key)
        if act is None:
            raise UsageError(f"{path}: unknown key {key!r} for this command")
        if isinstance(act, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = act.type(raw) if act.type else raw
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"{path}: {key}: {exc}") from None
            except ValueError:
                raise UsageError(f"{path}: {key}: invalid value {raw!r}") from None
            if act.choices is not None and value not in act.choices:
                raise UsageError(f"{path}: {key}: {raw!r} not one of {', '.join(act.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        try:
            _apply_config(sub, read_config(args.config), args.config)
        except UsageError as exc:
            sub.error(str(exc))
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# commands

def _load_edges(args):
    if args.synthetic is not None:
        extra = dict(zip(("triad_prob", "internal_prob"), args.synthetic[2:]))
        try:
            return generate_synthetic(*args.synthetic[:2], seed=args.seed, **extra)
        except ValueError as exc:
            raise UsageError(f"--synthetic: {exc}") from None
    if not args.dataset:
        raise UsageError("one of --dataset or --synthetic is required")
    try:
        fmt = EdgeListFormat.parse(args.format, args.delimiter)
    except ValueError as exc:
        raise UsageError(f"--format: {exc}") from None
    try:
        edges = read_edge_list(args.dataset, fmt)
    except OSError as exc:
        raise DataError(f"cannot read {args.dataset}: {exc.strerror}") from None
    if not edges:
        raise DataError(f"{args.dataset}: no edges")
    return edges


def _dataset_name(args) -> str:
    if args.synthetic is not None:
        return "synthetic-" + "-".join(str(v) for v in args.synthetic)
    return Path(args.dataset).stem


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _drift_config(args) -> DriftConfig:
    return DriftConfig(args.drift_iterations, args.symmetrization, args.temporal)


def _kinds(args) -> list[IndexKind]:
    return [IndexKind(name, args.epsilon) for name in args.index]


def cmd_stats(args) -> int:
    edges = _load_edges(args)
    g = giant_component(build_graph(edges, args.aggregation or "count-interactions"))
    st = network_stats(g).as_dict()
    row = {"dataset": _dataset_name(args), **st}
    with open(_out_dir(args) / "stats.csv", "w", newline="") as fh:
        for out in (fh, sys.stdout):
            w = csv.writer(out, lineterminator="\n")
            w.writerow(row.keys())
            w.writerow([_fmt(v) for v in row.values()])
    return EXIT_OK


def cmd_predict(args) -> int:
    edges = _load_edges(args)
    g = build_graph(edges, args.aggregation or "count-interactions")
    cfg = _drift_config(args)
    g = drift_iterate(g, cfg)
    header = (f"# index={','.join(args.index)} epsilon={args.epsilon:g} "
              f"drift_iterations={cfg.iterations} symmetrization={cfg.symmetrization} "
              f"temporal={cfg.temporal} top_k={args.top_k}\n")
    if args.output == "-":
        fh, close = sys.stdout, False
    else:
        path = Path(args.output) if args.output else _out_dir(args) / "predictions.csv"
        fh, close = open(path, "w", newline=""), True
    try:
        fh.write(header)
        fh.write("index,x,y,score\n")
        for kind in _kinds(args):
            if args.top_k == 0:
                continue
            ranked = rank_non_observed(g, kind, args.top_k, workers=args.workers)
            for x, y, s in ranked:
                fh.write(f"{kind.tag},{g.labels[x]},{g.labels[y]},{s:.12g}\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _experiment_kwargs(args) -> dict:
    return dict(protocol=args.protocol, indices=_kinds(args), trials=args.trials, seed=args.seed,
                train_fraction=args.train_fraction, auc_samples=args.auc_samples,
                auc_method=args.auc_method, aggregation=args.aggregation,
                dataset=_dataset_name(args), workers=args.workers,
                deletion_ratios=args.delete_ratio)


def write_config(args, fh) -> None:
    """Resolved options in ``--config`` syntax."""
    skip = {"command", "func", "config", "out_dir", "output"}
    for key, value in sorted(vars(args).items()):
        if key in skip or value is None:
            continue
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value) if key != "synthetic" else ":".join(map(str, value))
        fh.write(f"{key} = {value}\n")


def cmd_evaluate(args) -> int:
    edges = _load_edges(args)
    out = _out_dir(args)
    cfg = _drift_config(args) if args.drift_iterations > 0 else None
    with open(out / "config.txt", "w") as fh:
        write_config(args, fh)
    reports = []
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)

        def flush(report):
            reports.append(report)
            row = vars(report)
            w.writerow([_fmt(row[k]) for k in REPORT_FIELDS])
            fh.flush()

        try:
            run_experiment(edges, drift=cfg, include_undrifted=not args.no_undrifted,
                           on_report=flush, **_experiment_kwargs(args))
        finally:
            with open(out / "timings.csv", "w", newline="") as tf:
                write_timings_csv(reports, tf)
    rows = summarize(reports)
    with open(out / "summary.csv", "w", newline="") as fh:
        write_summary_csv(rows, fh)
    write_summary_csv(rows, sys.stdout, timings=True)
    return EXIT_OK


def cmd_sweep_iterations(args) -> int:
    edges = _load_edges(args)
    if len({e.t for e in edges}) < 2:
        raise DataError("sweep-iterations needs a temporal dataset: every interaction has the same "
                        "timestamp (add a 't' column to --format)")
    out = _out_dir(args)
    with open(out / "config.txt", "w") as fh:
        write_config(args, fh)
    base = DriftConfig(0, args.symmetrization, args.temporal)
    rows = sweep_iterations(edges, args.iterations, base, **_experiment_kwargs(args))
    with open(out / "sweep.csv", "w", newline="") as fh:
        write_sweep_csv(rows, fh)
    write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"driftlink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, EdgeListError, GraphError) as exc:
        print(f"driftlink: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EvaluationError, MemoryError) as exc:
        print(f"driftlink: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"driftlink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
