"""BIC comparison of the Grouping and No-Grouping explanations of one variable.

Grouping: the proposed variable and the chosen ones are jointly
class-conditional Gaussian.  No-Grouping: the chosen variables are
class-conditional Gaussian and the proposed variable is a linear regression
on them.  Half the BIC difference approximates the log Bayes factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .covariance import CovarianceStructure
from .dataset import LabeledSplit
from .mixture import (
    MixtureModel,
    SingularFitError,
    best_structure_fit,
    label_only_loglik,
)

LOG_2PI = float(np.log(2.0 * np.pi))
# sigma2 below this fraction of var(target) counts as an exact fit
PERFECT_FIT = 1e-12
# relative pivot size below which a regression column is treated as dependent
RANK_TOL = 1e-10


@dataclass(frozen=True)
class RegressionFit:
    alpha: float
    beta: np.ndarray
    sigma2: float
    loglik: float
    rows: int
    d_reg: int
    dropped: tuple[int, ...] = ()
    near_perfect: bool = False

    @property
    def bic_reg(self) -> float:
        return 2.0 * self.loglik - self.d_reg * np.log(self.rows)


def regress(target: np.ndarray, predictors: np.ndarray | None = None) -> RegressionFit:
    """Least-squares regression with Gaussian MLE variance.

    Dependent predictor columns are detected by pivoted QR on the centred
    design and dropped; their positions are listed in ``dropped`` and their
    coefficients are zero.
    """
    y = np.asarray(target, dtype=float).ravel()
    n = len(y)
    if predictors is None:
        Z = np.zeros((n, 0))
    else:
        Z = np.asarray(predictors, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
    q = Z.shape[1]
    if n < q + 2:
        raise ValueError(f"need at least {q + 2} rows for {q} predictors, got {n}")

    y_mean = y.mean()
    beta = np.zeros(q)
    dropped: tuple[int, ...] = ()
    if q:
        z_mean = Z.mean(axis=0)
        Zc = Z - z_mean
        Qm, R, piv = scipy.linalg.qr(Zc, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        ref = diag[0] if diag.size and diag[0] > 0 else 1.0
        rank = int(np.sum(diag > RANK_TOL * ref))
        if rank:
            coef = scipy.linalg.solve_triangular(R[:rank, :rank], Qm[:, :rank].T @ (y - y_mean))
            beta[piv[:rank]] = coef
        dropped = tuple(sorted(int(j) for j in piv[rank:]))
        alpha = float(y_mean - z_mean @ beta)
    else:
        rank = 0
        alpha = float(y_mean)
    resid = y - alpha - (Z @ beta if q else 0.0)
    sigma2 = float(resid @ resid / n)
    var_y = float(np.var(y))
    near_perfect = sigma2 < PERFECT_FIT * var_y or sigma2 == 0.0
    s2 = max(sigma2, PERFECT_FIT * var_y, np.finfo(float).tiny)
    loglik = -0.5 * n * (LOG_2PI + np.log(s2) + sigma2 / s2)
    return RegressionFit(
        alpha=alpha,
        beta=beta,
        sigma2=sigma2,
        loglik=float(loglik),
        rows=n,
        d_reg=rank + 2,
        dropped=dropped,
        near_perfect=near_perfect,
    )


@dataclass(frozen=True)
class ComparisonResult:
    """Grouping vs No-Grouping BICs for one variable.

    ``diff`` is always ``bic_grouping - bic_nogrouping``.  For a removal
    check, the evidence for dropping the variable is ``-diff``.
    """

    variable: int
    bic_grouping: float
    structure_grouping: CovarianceStructure | None
    bic_nogrouping: float
    structure_nogrouping: CovarianceStructure | None
    kind: str = "add"

    @property
    def diff(self) -> float:
        return self.bic_grouping - self.bic_nogrouping

    @property
    def evidence(self) -> float:
        """BIC difference in favour of the proposed action."""
        return self.diff if self.kind == "add" else -self.diff


def _sorted(cols: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(int(c) for c in cols))


class Comparator:
    """Model comparisons on one split, with a cache of grouping fits.

    With ``updating`` the class models are fitted by EM over labeled and
    unlabeled rows and regressions use all rows; otherwise only the
    labeled rows enter.  ``regression_rows`` overrides the regression
    row set (``"all"`` or ``"labeled"``).
    """

    def __init__(
        self,
        split: LabeledSplit,
        updating: bool = True,
        structures: Sequence[CovarianceStructure | str] | None = None,
        regression_rows: str | None = None,
    ):
        self.split = split
        self.updating = updating
        self.structures = None if structures is None else tuple(structures)
        rows = regression_rows or ("all" if updating else "labeled")
        if rows not in ("all", "labeled"):
            raise ValueError(f"regression_rows must be 'all' or 'labeled', not {rows!r}")
        if rows == "all":
            self._reg_data = np.vstack([split.labeled.values, split.unlabeled.values])
        else:
            self._reg_data = split.labeled.values
        self._fits: dict[tuple[int, ...], MixtureModel | None] = {}
        self.n_fits = 0

    @property
    def n_fit(self) -> int:
        n = self.split.labeled.n
        return n + self.split.unlabeled.n if self.updating else n

    def grouping_fit(self, cols: Iterable[int]) -> MixtureModel | None:
        """Best-BIC class model on ``cols``; ``None`` if every structure is singular."""
        key = _sorted(cols)
        if key not in self._fits:
            self.n_fits += 1
            try:
                self._fits[key] = best_structure_fit(
                    self.split,
                    key,
                    fitter="semisupervised" if self.updating else "supervised",
                    structures=self.structures,
                )
            except SingularFitError:
                self._fits[key] = None
        return self._fits[key]

    def chosen_bic(self, cols: Iterable[int]) -> float:
        """BIC of the class model on ``cols`` (labels alone when empty)."""
        cols = _sorted(cols)
        if not cols:
            G = self.split.G
            ll = label_only_loglik(self.split.labeled.labels, G)
            return 2.0 * ll - (G - 1) * np.log(self.n_fit)
        model = self.grouping_fit(cols)
        return -np.inf if model is None else model.bic

    def regression(self, target: int, predictors: Iterable[int]) -> RegressionFit:
        predictors = _sorted(predictors)
        Z = self._reg_data[:, predictors] if predictors else None
        return regress(self._reg_data[:, target], Z)

    def compare_add(
        self, chosen: Iterable[int], proposed: int, chosen_bic: float | None = None
    ) -> ComparisonResult:
        chosen = _sorted(chosen)
        proposed = int(proposed)
        if proposed in chosen:
            raise ValueError(f"variable {proposed} is already chosen")
        grouping = self.grouping_fit(chosen + (proposed,))
        base = self.chosen_bic(chosen) if chosen_bic is None else chosen_bic
        reg = self.regression(proposed, chosen)
        base_model = self.grouping_fit(chosen) if chosen else None
        return ComparisonResult(
            variable=proposed,
            bic_grouping=-np.inf if grouping is None else grouping.bic,
            structure_grouping=None if grouping is None else grouping.structure,
            bic_nogrouping=base + reg.bic_reg,
            structure_nogrouping=None if base_model is None else base_model.structure,
            kind="add",
        )

    def compare_remove(self, chosen: Iterable[int], candidate: int) -> ComparisonResult:
        chosen = _sorted(chosen)
        candidate = int(candidate)
        if candidate not in chosen:
            raise ValueError(f"variable {candidate} is not chosen")
        if len(chosen) < 2:
            raise ValueError("removal would leave no chosen variables")
        rest = tuple(c for c in chosen if c != candidate)
        grouping = self.grouping_fit(chosen)
        rest_model = self.grouping_fit(rest)
        reg = self.regression(candidate, rest)
        rest_bic = -np.inf if rest_model is None else rest_model.bic
        # a singular reduced model cannot justify a removal
        return ComparisonResult(
            variable=candidate,
            bic_grouping=-np.inf if grouping is None else grouping.bic,
            structure_grouping=None if grouping is None else grouping.structure,
            bic_nogrouping=rest_bic + reg.bic_reg,
            structure_nogrouping=None if rest_model is None else rest_model.structure,
            kind="remove",
        )


def fit_regression(
    split: LabeledSplit, target: int, predictors: Sequence[int], updating: bool = True
) -> RegressionFit:
    return Comparator(split, updating=updating).regression(target, predictors)


def compare_add(
    split: LabeledSplit,
    chosen: Sequence[int],
    proposed: int,
    chosen_bic: float | None = None,
    updating: bool = True,
    structures: Sequence[CovarianceStructure | str] | None = None,
) -> ComparisonResult:
    return Comparator(split, updating, structures).compare_add(chosen, proposed, chosen_bic)


def compare_remove(
    split: LabeledSplit,
    chosen: Sequence[int],
    candidate: int,
    updating: bool = True,
    structures: Sequence[CovarianceStructure | str] | None = None,
) -> ComparisonResult:
    return Comparator(split, updating, structures).compare_remove(chosen, candidate)
