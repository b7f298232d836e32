"""Repeated random-split evaluation, selection frequencies and report files."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset, aggregate, stratified_split
from .mixture import classify
from .search import SearchConfig, TraceRecord, run

log = logging.getLogger(__name__)


def split_seeds(master_seed: int, n_splits: int) -> list[int]:
    """Per-split seeds ``master XOR i``; any split can be rerun on its own."""
    return [int(master_seed) ^ i for i in range(n_splits)]


@dataclass
class SplitRecord:
    seed: int
    ok: bool
    error_rate: float = math.nan
    confusion: list[list[int]] = field(default_factory=list)
    selected: list[float] = field(default_factory=list)
    structure: str | None = None
    trace: list[TraceRecord] = field(default_factory=list)
    n_labeled: int = 0
    n_unlabeled: int = 0
    hit_iteration_cap: bool = False
    message: str = ""

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("trace")
        if not self.ok:
            out["error_rate"] = None
        return out


def confusion_matrix(truth: np.ndarray, pred: np.ndarray, G: int) -> np.ndarray:
    out = np.zeros((G, G), dtype=int)
    np.add.at(out, (truth, pred), 1)
    return out


def evaluate_split(
    d: Dataset, seed: int, config: SearchConfig, train_frac: float = 0.5
) -> SplitRecord:
    """Select variables on one random split and score the unlabeled half."""
    split = stratified_split(d, train_frac, seed)
    truth = split.ground_truth()
    try:
        result = run(split, config)
        if result.model is None:
            # nothing selected: fall back to the most frequent labeled class
            counts = split.labeled.class_counts()
            pred = np.full(split.unlabeled.n, int(np.argmax(counts)))
            structure = None
        else:
            pred = classify(result.model, split.unlabeled).labels
            structure = result.model.structure.value
    except Exception as exc:  # recorded, not raised: one bad split must not sink a study
        log.exception("split %d failed", seed)
        return SplitRecord(
            seed=seed,
            ok=False,
            n_labeled=split.labeled.n,
            n_unlabeled=split.unlabeled.n,
            message=f"{type(exc).__name__}: {exc}",
        )
    cm = confusion_matrix(truth, pred, d.G)
    return SplitRecord(
        seed=seed,
        ok=True,
        error_rate=float(np.mean(pred != truth)),
        confusion=cm.tolist(),
        selected=result.selected,
        structure=structure,
        trace=list(result.trace),
        n_labeled=split.labeled.n,
        n_unlabeled=split.unlabeled.n,
        hit_iteration_cap=result.state.hit_iteration_cap,
    )


def _evaluate_one(args):
    d, seed, config, train_frac = args
    return evaluate_split(d, seed, config, train_frac)


@dataclass
class RunReport:
    records: list[SplitRecord]
    class_names: tuple[str, ...]
    var_ids: np.ndarray
    config: SearchConfig
    train_frac: float = 0.5
    master_seed: int = 0

    @property
    def successful(self) -> list[SplitRecord]:
        return [r for r in self.records if r.ok]

    @property
    def n_failed(self) -> int:
        return len(self.records) - len(self.successful)

    def rates(self) -> np.ndarray:
        return np.array([r.error_rate for r in self.successful])

    @property
    def mean_error(self) -> float:
        rates = self.rates()
        return float(np.mean(rates)) if len(rates) else math.nan

    @property
    def sd_error(self) -> float:
        rates = self.rates()
        return float(np.std(rates, ddof=1)) if len(rates) > 1 else math.nan

    def pooled_confusion(self) -> np.ndarray:
        G = len(self.class_names)
        total = np.zeros((G, G), dtype=int)
        for r in self.successful:
            total += np.asarray(r.confusion, dtype=int)
        return total

    def confusion_percent(self) -> np.ndarray:
        """Row-normalised pooled confusion, in percent."""
        cm = self.pooled_confusion().astype(float)
        rows = cm.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, 100.0 * cm / rows, 0.0)

    def histogram(self) -> list[tuple[float, int]]:
        return frequency_histogram(self.successful, self.var_ids)

    def to_dict(self) -> dict:
        n_sel = [len(r.selected) for r in self.successful]
        return {
            "config": asdict(self.config),
            "train_frac": self.train_frac,
            "master_seed": self.master_seed,
            "class_names": list(self.class_names),
            "n_splits": len(self.records),
            "n_successful": len(self.successful),
            "n_failed": self.n_failed,
            "mean_error": _num(self.mean_error),
            "sd_error": _num(self.sd_error),
            "n_selected_min": min(n_sel) if n_sel else None,
            "n_selected_max": max(n_sel) if n_sel else None,
            "n_selected_mean": _num(float(np.mean(n_sel))) if n_sel else None,
            "confusion_percent": self.confusion_percent().tolist(),
            "splits": [r.summary() for r in self.records],
        }


def _num(x: float):
    return None if x is None or not math.isfinite(x) else x


def frequency_histogram(
    records: Sequence[SplitRecord], var_ids: Sequence[float]
) -> list[tuple[float, int]]:
    """How many splits selected each variable, in var_id order."""
    counts = {float(v): 0 for v in var_ids}
    for r in records:
        if not r.ok:
            continue
        for v in set(r.selected):
            counts[float(v)] = counts.get(float(v), 0) + 1
    return sorted(counts.items())


def evaluate(
    d: Dataset,
    config: SearchConfig,
    n_splits: int = 50,
    master_seed: int = 0,
    train_frac: float = 0.5,
    workers: int = 1,
) -> RunReport:
    seeds = split_seeds(master_seed, n_splits)
    jobs = [(d, s, config, train_frac) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_evaluate_one, jobs))
    else:
        records = []
        for i, job in enumerate(jobs):
            records.append(_evaluate_one(job))
            log.info("split %d/%d seed=%d error=%.4f", i + 1, n_splits, job[1], records[-1].error_rate)
    return RunReport(
        records=records,
        class_names=d.class_names,
        var_ids=d.var_ids,
        config=config,
        train_frac=train_frac,
        master_seed=master_seed,
    )


def aggregation_sweep(
    d: Dataset,
    levels: Sequence[int],
    config: SearchConfig,
    n_splits: int = 50,
    master_seed: int = 0,
    train_frac: float = 0.5,
    workers: int = 1,
) -> list[dict]:
    """Full evaluation at each aggregation level, reusing the same seeds."""
    rows = []
    for level in levels:
        report = evaluate(aggregate(d, level), config, n_splits, master_seed, train_frac, workers)
        rows.append(
            {
                "level": int(level),
                "p": int(aggregate(d, level).p),
                "mean_error": _num(report.mean_error),
                "sd_error": _num(report.sd_error),
                "n_successful": len(report.successful),
                "n_failed": report.n_failed,
                "report": report,
            }
        )
    return rows


def write_report(report: RunReport, out: str | Path) -> Path:
    """Write ``report.json``, ``hist.csv``, ``confusion.csv`` and per-split traces."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with (out / "hist.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["var_id", "count"])
        for v, c in report.histogram():
            w.writerow([repr(v), c])
    with (out / "confusion.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["truth"] + list(report.class_names))
        for name, row in zip(report.class_names, report.confusion_percent()):
            w.writerow([name] + [f"{x:.4f}" for x in row])
    for r in report.records:
        sdir = out / "splits" / str(r.seed)
        sdir.mkdir(parents=True, exist_ok=True)
        write_trace(r.trace, sdir / "trace.jsonl")
    return out


def write_trace(trace: Sequence[TraceRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in trace:
            fh.write(rec.to_json() + "\n")


def write_sweep(rows: Sequence[dict], out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "p", "mean_error", "sd_error", "n_successful", "n_failed"])
        for r in rows:
            w.writerow([r["level"], r["p"], r["mean_error"], r["sd_error"], r["n_successful"], r["n_failed"]])
    for r in rows:
        write_report(r["report"], out / f"level_{r['level']}")
    return out
