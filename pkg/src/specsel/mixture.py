"""Gaussian class models fitted on labeled data, optionally updated by EM
over the unlabeled rows as well."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .covariance import (
    CovarianceSet,
    CovarianceStructure,
    GroupScatter,
    estimate,
    param_count,
    structures_for,
)
from .dataset import Dataset, LabeledSplit

EM_TOL = 1e-7
EM_MAX_ITER = 500


def logsumexp(a: np.ndarray, axis: int = -1, keepdims: bool = False) -> np.ndarray:
    """Stable ``log(sum(exp(a)))`` along ``axis``."""
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return out if keepdims else np.squeeze(out, axis=axis)


class SingularFitError(RuntimeError):
    """No applicable covariance structure gave a non-singular fit."""


@dataclass(frozen=True)
class MixtureModel:
    """A fitted G-class Gaussian model on a subset of columns."""

    structure: CovarianceStructure
    tau: np.ndarray
    means: np.ndarray
    covs: CovarianceSet
    loglik: float
    n_fit: int
    d: int
    cols: tuple[int, ...] = ()
    singular: bool = False
    converged: bool = True
    n_iter: int = 0
    loglik_path: tuple[float, ...] = field(default=(), repr=False)

    @property
    def bic(self) -> float:
        return 2.0 * self.loglik - self.d * np.log(self.n_fit)

    @property
    def G(self) -> int:
        return len(self.tau)

    @property
    def p(self) -> int:
        return self.means.shape[1]

    @property
    def flagged(self) -> bool:
        return self.singular or not self.converged

    def log_joint(self, X: np.ndarray) -> np.ndarray:
        """``log tau_g + log f(x | g)`` for each row and class."""
        return np.log(self.tau)[None, :] + self.covs.log_density(X, self.means)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.value,
            "tau": self.tau.tolist(),
            "means": self.means.tolist(),
            "sigmas": self.covs.sigmas.tolist(),
            "loglik": float(self.loglik),
            "n_fit": int(self.n_fit),
            "d": int(self.d),
            "bic": float(self.bic),
            "cols": list(self.cols),
            "singular": bool(self.singular),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureModel":
        structure = CovarianceStructure(data["structure"])
        covs = CovarianceSet.from_sigmas(structure, np.array(data["sigmas"], dtype=float))
        return cls(
            structure=structure,
            tau=np.array(data["tau"], dtype=float),
            means=np.array(data["means"], dtype=float),
            covs=covs,
            loglik=float(data["loglik"]),
            n_fit=int(data["n_fit"]),
            d=int(data["d"]),
            cols=tuple(int(c) for c in data.get("cols", ())),
            singular=bool(data.get("singular", False)) or covs.singular,
            converged=bool(data.get("converged", True)),
            n_iter=int(data.get("n_iter", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "MixtureModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Responsibilities:
    """Posterior class probabilities for unlabeled rows."""

    z_hat: np.ndarray
    labels: np.ndarray
    ties: np.ndarray

    @classmethod
    def from_log_joint(cls, log_joint: np.ndarray) -> "Responsibilities":
        log_z = log_joint - logsumexp(log_joint, axis=1, keepdims=True)
        z = np.exp(log_z)
        z /= z.sum(axis=1, keepdims=True)
        labels = np.argmax(log_joint, axis=1)
        top = np.take_along_axis(log_joint, labels[:, None], axis=1)[:, 0]
        ties = np.sum(log_joint == top[:, None], axis=1) > 1
        return cls(z_hat=z, labels=labels, ties=ties)


def n_params(structure: CovarianceStructure | str, p: int, G: int) -> int:
    """Mixing proportions, means and covariance parameters."""
    return (G - 1) + G * p + param_count(structure, p, G)


def _onehot(labels: np.ndarray, G: int) -> np.ndarray:
    out = np.zeros((len(labels), G))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def _as_cols(cols: Iterable[int]) -> tuple[int, ...]:
    cols = tuple(sorted(int(c) for c in cols))
    if not cols:
        raise ValueError("at least one column is required")
    if len(set(cols)) != len(cols):
        raise ValueError("duplicate columns")
    return cols


def supervised_arrays(
    X: np.ndarray, labels: np.ndarray, G: int, structure: CovarianceStructure | str
) -> MixtureModel:
    """Complete-data MLE from hard labels."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    structure = CovarianceStructure(structure)
    if G < 1:
        raise ValueError("need at least one class")
    weights = _onehot(labels, G)
    stats = GroupScatter.from_weights(X, weights)
    covs = estimate(stats, structure)
    tau = stats.n_g / stats.total
    ll = float(np.sum(weights * (np.log(tau)[None, :] + covs.log_density(X, stats.means))))
    return MixtureModel(
        structure=structure,
        tau=tau,
        means=stats.means,
        covs=covs,
        loglik=ll,
        n_fit=len(X),
        d=n_params(structure, X.shape[1], G),
        singular=covs.singular,
        converged=covs.converged,
        loglik_path=(ll,),
    )


def semisupervised_arrays(
    X: np.ndarray,
    labels: np.ndarray,
    Y: np.ndarray,
    G: int,
    structure: CovarianceStructure | str,
    *,
    tol: float = EM_TOL,
    max_iter: int = EM_MAX_ITER,
) -> tuple[MixtureModel, Responsibilities]:
    """EM over labeled rows ``X`` (hard labels) and unlabeled rows ``Y``.

    Starts from the supervised MLE.  The returned parameters are the last
    iterate whose observed-data log-likelihood was evaluated, so
    ``loglik`` and the responsibilities both refer to them.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    structure = CovarianceStructure(structure)
    model = supervised_arrays(X, labels, G, structure)
    if len(Y) == 0:
        return model, Responsibilities.from_log_joint(np.zeros((0, G)))

    hard = _onehot(labels, G)
    XY = np.vstack([X, Y])
    N = len(X)
    rows_x = np.arange(N)
    tau, means, covs = model.tau, model.means, model.covs
    path: list[float] = []
    singular = model.singular
    converged = False
    log_joint_y = None
    it = 0
    while True:
        log_joint = np.log(tau)[None, :] + covs.log_density(XY, means)
        log_joint_y = log_joint[N:]
        ll = float(np.sum(log_joint[rows_x, labels]) + np.sum(logsumexp(log_joint_y, axis=1)))
        path.append(ll)
        if singular:
            break
        if len(path) > 1 and abs(path[-1] - path[-2]) <= tol * abs(path[-1]):
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        z = np.exp(log_joint_y - logsumexp(log_joint_y, axis=1, keepdims=True))
        stats = GroupScatter.from_weights(XY, np.vstack([hard, z]))
        new_covs = estimate(stats, structure)
        if new_covs.singular:
            singular = True
            break
        tau = stats.n_g / stats.total
        means = stats.means
        covs = new_covs

    model = MixtureModel(
        structure=structure,
        tau=tau,
        means=means,
        covs=covs,
        loglik=path[-1],
        n_fit=len(X) + len(Y),
        d=model.d,
        singular=singular,
        converged=converged and covs.converged,
        n_iter=it,
        loglik_path=tuple(path),
    )
    return model, Responsibilities.from_log_joint(log_joint_y)


def fit_supervised(
    labeled: Dataset, cols: Sequence[int], structure: CovarianceStructure | str
) -> MixtureModel:
    if labeled.labels is None:
        raise ValueError("fit_supervised needs labeled data")
    cols = _as_cols(cols)
    model = supervised_arrays(labeled.values[:, cols], labeled.labels, labeled.G, structure)
    return replace(model, cols=cols)


def fit_semisupervised(
    split: LabeledSplit,
    cols: Sequence[int],
    structure: CovarianceStructure | str,
    **em_options,
) -> tuple[MixtureModel, Responsibilities]:
    cols = _as_cols(cols)
    model, resp = semisupervised_arrays(
        split.labeled.values[:, cols],
        split.labeled.labels,
        split.unlabeled.values[:, cols],
        split.G,
        structure,
        **em_options,
    )
    return replace(model, cols=cols), resp


def classify(
    model: MixtureModel, unlabeled: Dataset | np.ndarray, cols: Sequence[int] | None = None
) -> Responsibilities:
    """Posterior probabilities and argmax labels (ties go to the lower index)."""
    if isinstance(unlabeled, Dataset):
        use = model.cols if cols is None else _as_cols(cols)
        if model.cols and set(use) != set(model.cols):
            raise ValueError("columns differ from those the model was fitted on")
        Y = unlabeled.values[:, use]
    else:
        Y = np.asarray(unlabeled, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
    return Responsibilities.from_log_joint(model.log_joint(Y))


def _rank_key(model: MixtureModel) -> tuple:
    # higher BIC first, then unflagged, then fewer parameters
    return (model.bic, not model.flagged, -model.d)


def pick_best(models: Iterable[MixtureModel]) -> MixtureModel:
    """Highest-BIC non-singular model; ties go to the more parsimonious one."""
    best = None
    for m in models:
        if m.singular or not np.isfinite(m.loglik):
            continue
        if best is None or _rank_key(m) > _rank_key(best):
            best = m
    if best is None:
        raise SingularFitError("every covariance structure gave a singular fit")
    return best


def best_structure_fit(
    data: Dataset | LabeledSplit,
    cols: Sequence[int],
    fitter: str = "semisupervised",
    structures: Sequence[CovarianceStructure | str] | None = None,
) -> MixtureModel:
    """Fit every applicable structure and return the max-BIC model.

    ``fitter`` is ``"supervised"`` (labeled rows only) or
    ``"semisupervised"`` (EM over labeled and unlabeled rows).
    """
    cols = _as_cols(cols)
    allowed = structures_for(len(cols))
    if structures is not None:
        wanted = {CovarianceStructure(s) for s in structures}
        allowed = tuple(s for s in allowed if s in wanted)
        if not allowed:
            raise ValueError(f"none of {sorted(map(str, wanted))} apply to p = {len(cols)}")
    if fitter not in ("supervised", "semisupervised"):
        raise ValueError(f"unknown fitter {fitter!r}")
    if isinstance(data, LabeledSplit):
        if fitter == "semisupervised":
            return pick_best(fit_semisupervised(data, cols, s)[0] for s in allowed)
        data = data.labeled
    return pick_best(fit_supervised(data, cols, s) for s in allowed)


def label_only_loglik(labels: np.ndarray, G: int) -> float:
    """Log-likelihood of the class labels under their MLE proportions."""
    counts = np.bincount(labels, minlength=G).astype(float)
    tau = counts / counts.sum()
    return float(np.sum(counts * np.log(tau)))
