"""Tabular/spectral data: loading, stratified labeled/unlabeled splits, aggregation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Malformed input data."""


@dataclass(frozen=True)
class Dataset:
    """An ``n x p`` matrix with variable ids and optional class labels.

    Labels are stored as dense 0-based class indices into ``class_names``.
    """

    values: np.ndarray
    var_ids: np.ndarray
    labels: np.ndarray | None = None
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain non-finite entries")
        var_ids = np.asarray(self.var_ids, dtype=float)
        if var_ids.shape != (values.shape[1],):
            raise DataError(
                f"expected {values.shape[1]} variable ids, got {var_ids.shape[0]}"
            )
        if np.any(np.diff(var_ids) <= 0):
            raise DataError("variable ids must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "var_ids", var_ids)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (values.shape[0],):
                raise DataError("one label per row required")
            G = len(self.class_names)
            if G == 0:
                raise DataError("labels given without class names")
            if labels.min(initial=0) < 0 or labels.max(initial=0) >= G:
                raise DataError("label index out of range")
            counts = np.bincount(labels, minlength=G)
            if np.any(counts == 0):
                empty = [self.class_names[g] for g in np.flatnonzero(counts == 0)]
                raise DataError(f"classes with no rows: {empty}")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def G(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        if self.labels is None:
            raise DataError("dataset has no labels")
        return np.bincount(self.labels, minlength=self.G)

    def take(self, rows: np.ndarray, keep_labels: bool = True) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        labels = self.labels[rows] if (keep_labels and self.labels is not None) else None
        return Dataset(
            self.values[rows],
            self.var_ids,
            labels,
            self.class_names,
        )


def _parse_float(text: str, row: int, col: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r} at row {row}, column {col}") from None


def load_csv(path: str | Path, label_column: str | None = None) -> Dataset:
    """Read a CSV whose header row holds numeric variable ids.

    If ``label_column`` names a header entry, that column supplies class
    labels; classes are indexed in order of first appearance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise DataError(f"label column {label_column!r} not in header")
            label_idx = header.index(label_column)
        var_cols = [j for j in range(len(header)) if j != label_idx]
        var_ids = [_parse_float(header[j], 1, j + 1) for j in var_cols]

        rows, raw_labels = [], []
        for r, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"row {r} has {len(record)} cells, expected {len(header)}"
                )
            rows.append([_parse_float(record[j].strip(), r, j + 1) for j in var_cols])
            if label_idx is not None:
                lab = record[label_idx].strip()
                if not lab:
                    raise DataError(f"missing label at row {r}")
                raw_labels.append(lab)

    if not rows:
        raise DataError(f"{path} has no data rows")
    values = np.array(rows, dtype=float)
    labels, names = None, ()
    if label_idx is not None:
        names = tuple(dict.fromkeys(raw_labels))
        index = {name: g for g, name in enumerate(names)}
        labels = np.array([index[lab] for lab in raw_labels], dtype=int)
    return Dataset(values, np.array(var_ids), labels, names)


def save_csv(d: Dataset, path: str | Path, label_column: str = "label") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = [repr(float(v)) for v in d.var_ids]
        if d.labels is not None:
            header.append(label_column)
        writer.writerow(header)
        for i in range(d.n):
            row = [repr(float(v)) for v in d.values[i]]
            if d.labels is not None:
                row.append(d.class_names[d.labels[i]])
            writer.writerow(row)


@dataclass(frozen=True)
class LabeledSplit:
    """Labeled and unlabeled partitions of a parent dataset.

    The unlabeled part carries no labels; its true classes sit in
    ``_truth`` and are only read back through :meth:`ground_truth` by the
    scorer.
    """

    labeled: Dataset
    unlabeled: Dataset
    seed: int
    labeled_rows: np.ndarray
    unlabeled_rows: np.ndarray
    _truth: np.ndarray | None = field(default=None, repr=False)

    @property
    def G(self) -> int:
        return self.labeled.G

    @property
    def var_ids(self) -> np.ndarray:
        return self.labeled.var_ids

    def ground_truth(self) -> np.ndarray:
        if self._truth is None:
            raise DataError("split has no ground truth for the unlabeled rows")
        return self._truth

    def manifest(self) -> dict:
        return {
            "seed": int(self.seed),
            "labeled": [int(i) for i in self.labeled_rows],
            "unlabeled": [int(i) for i in self.unlabeled_rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.manifest(), sort_keys=True)


def _labeled_counts(counts: np.ndarray, train_frac: float) -> np.ndarray:
    """Per-class labeled counts by largest remainder, at least one per class."""
    quota = train_frac * counts
    base = np.maximum(np.floor(quota).astype(int), 1)
    target = max(int(round(train_frac * counts.sum())), len(counts))
    spare = target - base.sum()
    if spare > 0:
        rem = quota - np.floor(quota)
        rem[base > np.floor(quota)] = -1.0
        order = np.argsort(-rem, kind="stable")
        for g in order[:spare]:
            if base[g] < counts[g]:
                base[g] += 1
    return base


def stratified_split(d: Dataset, train_frac: float, seed: int) -> LabeledSplit:
    """Random per-class partition into labeled and unlabeled rows."""
    if d.labels is None:
        raise DataError("stratified_split needs a labeled dataset")
    if not 0.0 < train_frac < 1.0:
        raise DataError("train_frac must lie in (0, 1)")
    counts = d.class_counts()
    for g, c in enumerate(counts):
        if train_frac * c < 1.0:
            raise DataError(
                f"class {d.class_names[g]!r} has {c} rows; too small for train_frac={train_frac}"
            )
    n_lab = _labeled_counts(counts, train_frac)
    rng = np.random.default_rng(seed)
    lab, unlab = [], []
    for g in range(d.G):
        rows = np.flatnonzero(d.labels == g)
        perm = rng.permutation(rows)
        lab.append(perm[: n_lab[g]])
        unlab.append(perm[n_lab[g]:])
    lab_rows = np.sort(np.concatenate(lab))
    unlab_rows = np.sort(np.concatenate(unlab))
    return LabeledSplit(
        labeled=d.take(lab_rows),
        unlabeled=d.take(unlab_rows, keep_labels=False),
        seed=int(seed),
        labeled_rows=lab_rows,
        unlabeled_rows=unlab_rows,
        _truth=d.labels[unlab_rows].copy(),
    )


def split_from_manifest(d: Dataset, manifest: dict) -> LabeledSplit:
    """Rebuild a split from a manifest written by :meth:`LabeledSplit.manifest`."""
    lab_rows = np.asarray(manifest["labeled"], dtype=int)
    unlab_rows = np.asarray(manifest["unlabeled"], dtype=int)
    both = np.concatenate([lab_rows, unlab_rows])
    if len(np.unique(both)) != len(both) or len(both) != d.n:
        raise DataError("manifest rows do not partition the dataset")
    return LabeledSplit(
        labeled=d.take(lab_rows),
        unlabeled=d.take(unlab_rows, keep_labels=False),
        seed=int(manifest["seed"]),
        labeled_rows=lab_rows,
        unlabeled_rows=unlab_rows,
        _truth=None if d.labels is None else d.labels[unlab_rows].copy(),
    )


def aggregate(d: Dataset, level: int) -> Dataset:
    """Average consecutive blocks of ``level`` columns.

    A trailing partial block is averaged over its actual width.
    """
    level = int(level)
    if level < 1:
        raise DataError("aggregation level must be >= 1")
    if level > d.p:
        raise DataError(f"aggregation level {level} exceeds p = {d.p}")
    if level == 1:
        return d
    starts = np.arange(0, d.p, level)
    widths = np.diff(np.append(starts, d.p))
    values = np.add.reduceat(d.values, starts, axis=1) / widths
    var_ids = np.add.reduceat(d.var_ids, starts) / widths
    return Dataset(values, var_ids, d.labels, d.class_names)


def merge_classes(d: Dataset, mapping: dict[str, str]) -> Dataset:
    """Relabel classes through ``mapping`` (old name -> new name).

    Names missing from ``mapping`` keep their own name.  Merged classes take
    the position of their first member in the original class order.
    """
    if d.labels is None:
        raise DataError("merge_classes needs a labeled dataset")
    unknown = set(mapping) - set(d.class_names)
    if unknown:
        raise DataError(f"unknown classes in mapping: {sorted(unknown)}")
    new_of_old = [mapping.get(name, name) for name in d.class_names]
    names = tuple(dict.fromkeys(new_of_old))
    if not names:
        raise DataError("mapping leaves no classes")
    index = {name: g for g, name in enumerate(names)}
    remap = np.array([index[n] for n in new_of_old], dtype=int)
    return Dataset(d.values, d.var_ids, remap[d.labels], names)


def parse_merge_rules(text: str | Sequence[str]) -> dict[str, str]:
    """Parse ``"chicken+turkey=poultry"`` style merge rules."""
    rules = [text] if isinstance(text, str) else list(text)
    mapping: dict[str, str] = {}
    for rule in rules:
        for part in rule.split(";"):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise DataError(f"bad merge rule {part!r}; expected a+b=new")
            lhs, new = part.split("=", 1)
            for old in lhs.split("+"):
                mapping[old.strip()] = new.strip()
    return mapping


def column_index(d: Dataset, var_ids: Sequence[float]) -> list[int]:
    """Column positions of the given variable ids."""
    out = []
    for v in var_ids:
        hits = np.flatnonzero(np.isclose(d.var_ids, float(v), rtol=0, atol=1e-9))
        if len(hits) == 0:
            raise DataError(f"variable id {v} not present")
        out.append(int(hits[0]))
    return out

