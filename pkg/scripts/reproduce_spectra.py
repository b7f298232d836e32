"""Fifty-split studies on the meat and olive-oil spectra, when the CSVs are at hand.

    python scripts/reproduce_spectra.py --meats meats.csv --olive olive.csv --out results/
"""

import argparse
import json
from pathlib import Path

from specsel.dataset import load_csv, merge_classes, parse_merge_rules
from specsel.harness import aggregation_sweep, evaluate, write_report, write_sweep
from specsel.search import SearchConfig


def summary(report):
    sizes = [len(r.selected) for r in report.successful]
    return {
        "mean_error": report.mean_error,
        "sd_error": report.sd_error,
        "n_selected": [min(sizes), max(sizes)] if sizes else None,
        "n_failed": report.n_failed,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--meats")
    ap.add_argument("--olive")
    ap.add_argument("--label-col", default="label")
    ap.add_argument("--merge", default="Chicken+Turkey=Poultry")
    ap.add_argument("--splits", type=int, default=50)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    results = {}

    studies = {}
    if args.meats:
        meats = load_csv(args.meats, args.label_col)
        studies["meats5"] = meats
        studies["meats4"] = merge_classes(meats, parse_merge_rules(args.merge))
    if args.olive:
        studies["olive"] = load_csv(args.olive, args.label_col)

    for name, d in studies.items():
        for strategy in ("headlong", "greedy"):
            for updating in (True, False):
                key = f"{name}-{strategy}-{'upd' if updating else 'sup'}"
                cfg = SearchConfig(strategy=strategy, updating=updating)
                report = evaluate(d, cfg, args.splits, 0, workers=args.workers)
                write_report(report, out / key)
                results[key] = summary(report)
                print(key, json.dumps(results[key]))

    if args.olive:
        rows = aggregation_sweep(
            studies["olive"], [1, 2, 3, 5, 10, 15, 30, 50, 70], SearchConfig(), args.splits, 0, workers=args.workers
        )
        write_sweep(rows, out / "olive-sweep")
        results["olive-sweep"] = {r["level"]: r["mean_error"] for r in rows}

    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(results, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
