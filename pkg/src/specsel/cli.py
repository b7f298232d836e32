"""Command-line entry point: ``specsel fit|evaluate|aggregate-sweep``.

Exit codes: 0 success, 2 data error, 3 config error, 4 every split failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import (
    DataError,
    aggregate,
    load_csv,
    merge_classes,
    parse_merge_rules,
    stratified_split,
)
from .harness import aggregation_sweep, evaluate, write_report, write_sweep, write_trace
from .mixture import classify
from .search import ORDERINGS, STRATEGIES, SearchConfig, run

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 2, 3, 4

log = logging.getLogger("specsel")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _on_off(text: str) -> bool:
    if text.lower() in ("on", "true", "yes", "1"):
        return True
    if text.lower() in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError("expected on or off")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with numeric variable ids in the header")
    p.add_argument("--label-col", default="label")
    p.add_argument("--train-frac", type=float, default=0.5)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--strategy", choices=STRATEGIES, default="headlong")
    p.add_argument("--min-evidence", type=float, default=0.0)
    p.add_argument("--updating", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--max-selected", type=int, default=None)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--ordering", choices=ORDERINGS, default="bic-rank")
    p.add_argument("--aggregate", type=int, default=1, metavar="K")
    p.add_argument(
        "--merge-classes",
        action="append",
        default=[],
        metavar="A+B=NEW",
        help="merge classes before fitting, e.g. chicken+turkey=poultry",
    )
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specsel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="one split: select variables, emit model and trace")
    _common(fit)

    ev = sub.add_parser("evaluate", help="repeated random splits")
    _common(ev)
    ev.add_argument("--splits", type=int, default=50)
    ev.add_argument("--workers", type=int, default=1)

    sw = sub.add_parser("aggregate-sweep", help="evaluate at several aggregation levels")
    _common(sw)
    sw.add_argument("--splits", type=int, default=50)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--levels", default="1,2,3,5,10,15,30,50,70")
    return parser


def _config(args) -> SearchConfig:
    if not 0.0 < args.train_frac < 1.0:
        raise ConfigError("--train-frac must lie in (0, 1)")
    try:
        return SearchConfig(
            strategy=args.strategy,
            min_evidence=args.min_evidence,
            updating=args.updating,
            max_selected=args.max_selected,
            max_iterations=args.max_iterations,
            ordering=args.ordering,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load(args):
    d = load_csv(args.data, args.label_col)
    if d.labels is None:
        raise DataError("no labels loaded")
    if args.merge_classes:
        d = merge_classes(d, parse_merge_rules(args.merge_classes))
    if args.aggregate != 1:
        d = aggregate(d, args.aggregate)
    return d


def _cmd_fit(args, config) -> int:
    d = _load(args)
    split = stratified_split(d, args.train_frac, args.master_seed)
    result = run(split, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "split.json").write_text(split.to_json() + "\n", encoding="utf-8")
    write_trace(result.trace, out / "trace.jsonl")
    summary = {
        "seed": args.master_seed,
        "selected": result.selected,
        "structure": None if result.model is None else result.model.structure.value,
        "n_fits": result.n_fits,
        "hit_iteration_cap": result.state.hit_iteration_cap,
    }
    if result.model is not None:
        (out / "model.json").write_text(result.model.to_json(indent=2) + "\n", encoding="utf-8")
        pred = classify(result.model, split.unlabeled).labels
        summary["error_rate"] = float(np.mean(pred != split.ground_truth()))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_evaluate(args, config) -> int:
    d = _load(args)
    if args.splits < 1:
        raise ConfigError("--splits must be positive")
    report = evaluate(d, config, args.splits, args.master_seed, args.train_frac, args.workers)
    write_report(report, args.out)
    print(
        f"mean error {report.mean_error:.4f} (sd {report.sd_error:.4f}) over "
        f"{len(report.successful)}/{len(report.records)} splits"
    )
    return EXIT_OK if report.successful else EXIT_ALL_FAILED


def _cmd_sweep(args, config) -> int:
    d = _load(args)
    try:
        levels = [int(x) for x in args.levels.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --levels: {args.levels}") from exc
    if any(k < 1 or k > d.p for k in levels):
        raise ConfigError(f"levels must lie in [1, {d.p}]")
    rows = aggregation_sweep(d, levels, config, args.splits, args.master_seed, args.train_frac, args.workers)
    write_sweep(rows, args.out)
    for r in rows:
        print(f"level {r['level']:>3}  p={r['p']:>4}  mean error {r['mean_error']}")
    return EXIT_OK if all(r["n_successful"] for r in rows) else EXIT_ALL_FAILED


COMMANDS = {"fit": _cmd_fit, "evaluate": _cmd_evaluate, "aggregate-sweep": _cmd_sweep}


def main(argv=None) -> int:
    level = os.environ.get("SPECSEL_LOG", "WARNING").upper()
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    try:
        log.setLevel(level)
    except ValueError:
        print(f"config error: bad SPECSEL_LOG level {level!r}", file=sys.stderr)
        return EXIT_CONFIG
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
