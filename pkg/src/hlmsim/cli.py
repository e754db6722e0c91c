"""``hlmsim run``: sweep driver writing result CSV, JSONL traces and plot data.

Exit codes: 0 success, 1 runtime failure, 2 invalid flags or config.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Iterable, Sequence, TextIO

from .config import ConfigError, load_config, parse_float_list, parse_int_list
from .core import SimError
from .harness import CellResult, Method, run_experiment
from .metrics import RunSummary

log = logging.getLogger("hlmsim")

CSV_HEADER = (
    "method", "k", "gamma", "upload_rate_pct", "reject_rate_pct", "energy_saving_pct",
    "throughput_tok_per_sec", "fidelity_pct", "tokens_total", "seed",
)
PLOT_HEADER = ("method", "k", "gamma", "metric", "value")
SEED_ENV = "HLMSIM_SEED"


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def summary_row(s: RunSummary) -> list[str]:
    return [
        s.method,
        "" if s.k is None else str(s.k),
        "" if s.gamma is None else _fmt(s.gamma),
        _fmt(100 * s.upload_rate),
        _fmt(100 * s.reject_rate),
        _fmt(100 * s.energy_saving),
        _fmt(s.mean_throughput),
        _fmt(100 * s.fidelity),
        str(s.tokens_total),
        "" if s.seed is None else str(s.seed),
    ]


def _sort_key(s: RunSummary):
    return (Method(s.method).rank, -1 if s.k is None else s.k, -1.0 if s.gamma is None else s.gamma)


def emit_csv(summaries: Sequence[RunSummary], out: TextIO | str | os.PathLike) -> None:
    """Write the result table, one row per cell, sorted by (method, k, gamma)."""
    if not summaries:
        raise ValueError("no summaries to write")
    rows = [summary_row(s) for s in sorted(summaries, key=_sort_key)]
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", newline="") as fh:
            _write_rows(fh, CSV_HEADER, rows)
    else:
        _write_rows(out, CSV_HEADER, rows)


def _write_rows(fh: TextIO, header: Iterable[str], rows: Iterable[Sequence[str]]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(summaries: Sequence[RunSummary], path: str | os.PathLike) -> None:
    """Long format: one (cell, metric, value) triple per line."""
    metrics = {
        "upload_rate_pct": lambda s: 100 * s.upload_rate,
        "reject_rate_pct": lambda s: 100 * s.reject_rate,
        "energy_saving_pct": lambda s: 100 * s.energy_saving,
        "throughput_tok_per_sec": lambda s: s.mean_throughput,
        "fidelity_pct": lambda s: 100 * s.fidelity,
    }
    rows = []
    for s in sorted(summaries, key=_sort_key):
        head = summary_row(s)[:3]
        rows += [[*head, name, f"{fn(s):.6f}"] for name, fn in metrics.items()]
    with open(path, "w", newline="") as fh:
        _write_rows(fh, PLOT_HEADER, rows)


def emit_traces(results: Sequence[CellResult], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        for res in results:
            cell = {"method": res.cell.method.value, "k": res.cell.k, "gamma": res.cell.gamma}
            for prompt_index, trace in enumerate(res.traces):
                for rec in trace:
                    obj = {**cell, "prompt_index": prompt_index, **rec.to_dict()}
                    fh.write(json.dumps(obj, sort_keys=True, allow_nan=False) + "\n")


def _list_arg(parse):
    def conv(text: str):
        try:
            return parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return conv


def _methods_arg(text: str) -> tuple[Method, ...]:
    try:
        return tuple(Method(m.strip()) for m in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown method in {text!r}; choose from {', '.join(m.value for m in Method)}"
        ) from None


def _seed_arg(text: str) -> int:
    try:
        seed = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return seed


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hlmsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-cell progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a (method, k, gamma) sweep")
    run.add_argument("--config", required=True, help="JSON run config")
    run.add_argument("--out", help="result CSV (default: stdout)")
    run.add_argument("--trace", help="per-token trace, JSON lines")
    run.add_argument("--seed", type=_seed_arg, help=f"master seed (fallback: ${SEED_ENV}, then the config)")
    run.add_argument("--sweep-k", type=_list_arg(parse_int_list), help="comma list, e.g. 3,5,7")
    run.add_argument("--sweep-gamma", type=_list_arg(parse_float_list), help="comma list, e.g. 0.5,1.0")
    run.add_argument("--methods", type=_methods_arg, help="comma list of methods to report")
    run.add_argument("--plot-data", help="long-format CSV of every metric per cell")
    run.add_argument("--workers", type=int, help="worker processes for grid cells")
    return parser


def _resolve_seed(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return None
    try:
        return _seed_arg(env)
    except argparse.ArgumentTypeError as exc:
        raise ConfigError(SEED_ENV, str(exc)) from None


def _run(args: argparse.Namespace) -> int:
    exp = load_config(args.config, _resolve_seed(args.seed))
    overrides = {}
    if args.sweep_k is not None:
        overrides["k_values"] = args.sweep_k
    if args.sweep_gamma is not None:
        overrides["gamma_values"] = args.sweep_gamma
    if args.methods is not None:
        overrides["methods"] = args.methods
    if args.workers is not None:
        overrides["workers"] = max(1, args.workers)
    if overrides:
        exp = replace(exp, **overrides)

    results = run_experiment(exp.run, exp.grid(), workers=exp.workers)
    summaries = [r.summary for r in results]
    if args.out:
        emit_csv(summaries, args.out)
    else:
        buf = io.StringIO()
        emit_csv(summaries, buf)
        sys.stdout.write(buf.getvalue())
    if args.trace:
        emit_traces(results, args.trace)
    if args.plot_data:
        emit_plot_data(summaries, args.plot_data)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"hlmsim: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"hlmsim: config error: {exc}", file=sys.stderr)
        return 2
    except (SimError, OSError, ValueError) as exc:
        print(f"hlmsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
