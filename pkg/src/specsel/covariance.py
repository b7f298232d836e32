"""Constrained Gaussian covariance structures of the eigendecomposition family.

Each group covariance is written ``Sigma_g = lambda_g * D_g A_g D_g^T`` with
volume ``lambda_g``, a diagonal shape ``A_g`` normalised to determinant one,
and an orthonormal orientation ``D_g``.  The three letters of a structure id
say whether volume, shape and orientation are Equal, Variable or the
Identity across groups.

The estimators below are weighted maximum-likelihood M-steps.  They are
closed form except VEI and VEV, which alternate between the volume and the
shape updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

# relative eigenvalue floor below which an estimate is declared singular
EIGEN_FLOOR = 1e-10
INNER_TOL = 1e-8
INNER_MAX_ITER = 200


class StructureError(ValueError):
    """Structure id not valid for the data dimension."""


class CovarianceStructure(str, Enum):
    EII = "EII"
    VII = "VII"
    EEI = "EEI"
    VEI = "VEI"
    EVI = "EVI"
    VVI = "VVI"
    EEE = "EEE"
    EEV = "EEV"
    VEV = "VEV"
    VVV = "VVV"
    E = "E"
    V = "V"

    def __str__(self) -> str:
        return self.value

    @property
    def univariate(self) -> bool:
        return len(self.value) == 1

    @property
    def volume(self) -> str:
        return self.value[0]

    @property
    def shape(self) -> str:
        return "I" if self.univariate else self.value[1]

    @property
    def orientation(self) -> str:
        return "I" if self.univariate else self.value[2]

    def check_dim(self, p: int) -> None:
        if p < 1:
            raise StructureError("dimension must be at least 1")
        if self.univariate and p != 1:
            raise StructureError(f"{self.value} is only defined for p = 1, got p = {p}")
        if not self.univariate and p == 1:
            raise StructureError(f"{self.value} needs p >= 2; use E or V for p = 1")


MULTIVARIATE = tuple(s for s in CovarianceStructure if not s.univariate)
UNIVARIATE = (CovarianceStructure.E, CovarianceStructure.V)


def structures_for(p: int) -> tuple[CovarianceStructure, ...]:
    """All structures applicable to ``p`` variables."""
    if p < 1:
        raise StructureError("dimension must be at least 1")
    return UNIVARIATE if p == 1 else MULTIVARIATE


def param_count(structure: CovarianceStructure | str, p: int, G: int) -> int:
    """Number of free covariance parameters for ``G`` groups in ``p`` dimensions."""
    s = CovarianceStructure(structure)
    s.check_dim(p)
    if s.univariate:
        return 1 if s is CovarianceStructure.E else G
    volume = 1 if s.volume == "E" else G
    if s.shape == "I":
        shape = 0
    else:
        shape = (p - 1) * (1 if s.shape == "E" else G)
    if s.orientation == "I":
        orient = 0
    else:
        orient = p * (p - 1) // 2 * (1 if s.orientation == "E" else G)
    return volume + shape + orient


@dataclass(frozen=True)
class GroupScatter:
    """Weighted sufficient statistics for the covariance M-step.

    ``W[g]`` is ``sum_i w_ig (x_i - mean_g)(x_i - mean_g)^T``.
    """

    n_g: np.ndarray
    means: np.ndarray
    W: np.ndarray

    @classmethod
    def from_weights(cls, X: np.ndarray, weights: np.ndarray) -> "GroupScatter":
        X = np.asarray(X, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n_g = weights.sum(axis=0)
        if np.any(n_g <= 0):
            raise ValueError("every group needs positive total weight")
        means = (weights.T @ X) / n_g[:, None]
        centred = X[None, :, :] - means[:, None, :]
        W = np.transpose(centred * weights.T[:, :, None], (0, 2, 1)) @ centred
        W = 0.5 * (W + np.transpose(W, (0, 2, 1)))
        return cls(n_g=n_g, means=means, W=W)

    @property
    def G(self) -> int:
        return self.W.shape[0]

    @property
    def p(self) -> int:
        return self.W.shape[1]

    @property
    def total(self) -> float:
        return float(self.n_g.sum())


@dataclass(frozen=True)
class CovarianceSet:
    """Group covariances with cached Cholesky factors and log-determinants."""

    structure: CovarianceStructure
    sigmas: np.ndarray
    chol: np.ndarray = field(repr=False)
    inv_chol: np.ndarray = field(repr=False)
    log_dets: np.ndarray
    singular: bool = False
    converged: bool = True
    inner_iterations: int = 0

    @classmethod
    def from_sigmas(
        cls,
        structure: CovarianceStructure | str,
        sigmas: np.ndarray,
        *,
        converged: bool = True,
        inner_iterations: int = 0,
        scale: float | None = None,
    ) -> "CovarianceSet":
        """Validate, regularise if needed, and factorise ``sigmas``.

        ``scale`` sets the reference magnitude for the eigenvalue floor; by
        default the mean diagonal of each matrix.
        """
        structure = CovarianceStructure(structure)
        sigmas = np.array(sigmas, dtype=float)
        if sigmas.ndim == 2:
            sigmas = sigmas[None]
        structure.check_dim(sigmas.shape[1])
        sigmas = 0.5 * (sigmas + np.transpose(sigmas, (0, 2, 1)))
        p = sigmas.shape[1]
        singular = not np.all(np.isfinite(sigmas))
        if singular:
            sigmas = np.where(np.isfinite(sigmas), sigmas, 0.0)
        eig = np.linalg.eigvalsh(sigmas)
        diag_mean = np.trace(sigmas, axis1=1, axis2=2) / p
        ref = diag_mean if scale is None else np.full(len(sigmas), float(scale))
        floor = EIGEN_FLOOR * np.where(ref > 0, ref, 1.0)
        low = eig.min(axis=1) <= floor
        if np.any(low):
            singular = True
            sigmas = sigmas + (floor * low)[:, None, None] * np.eye(p)
        try:
            chol = np.linalg.cholesky(sigmas)
        except np.linalg.LinAlgError:
            singular = True
            sigmas = sigmas + (np.abs(eig).max(axis=1) * 1e-8 + floor)[:, None, None] * np.eye(p)
            chol = np.linalg.cholesky(sigmas)
        log_dets = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        return cls(
            structure=structure,
            sigmas=sigmas,
            chol=chol,
            inv_chol=np.linalg.inv(chol),
            log_dets=log_dets,
            singular=bool(singular),
            converged=converged,
            inner_iterations=inner_iterations,
        )

    @property
    def G(self) -> int:
        return self.sigmas.shape[0]

    @property
    def p(self) -> int:
        return self.sigmas.shape[1]

    def precisions(self) -> np.ndarray:
        return np.transpose(self.inv_chol, (0, 2, 1)) @ self.inv_chol

    def log_density(self, X: np.ndarray, means: np.ndarray) -> np.ndarray:
        """``(n, G)`` matrix of normal log-densities of the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        diff = X[None, :, :] - means[:, None, :]
        # (G, n, p) whitened residuals
        white = diff @ np.transpose(self.inv_chol, (0, 2, 1))
        maha = np.sum(white * white, axis=2).T
        return -0.5 * (self.p * LOG_2PI + self.log_dets[None, :] + maha)


def log_density(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate normal log-density of a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, x - mean)
    log_det = 2.0 * np.log(np.diag(L)).sum()
    return float(-0.5 * (len(x) * LOG_2PI + log_det + z @ z))


def profile_loglik(stats: GroupScatter, covs: CovarianceSet) -> float:
    """Gaussian log-likelihood at the group means, up to the mixing terms."""
    prec = covs.precisions()
    quad = np.einsum("gij,gji->g", prec, stats.W)
    return float(
        -0.5 * np.sum(stats.n_g * (covs.p * LOG_2PI + covs.log_dets) + quad)
    )


def _sorted_eigh(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in decreasing order, with matching eigenvectors."""
    vals, vecs = np.linalg.eigh(W)
    return vals[..., ::-1], vecs[..., ::-1]


def _norm_det(a: np.ndarray) -> np.ndarray:
    """Scale positive vectors along the last axis to unit product."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return a / np.exp(np.mean(np.log(a), axis=-1, keepdims=True))


def _alternate(
    n_g: np.ndarray, omega: np.ndarray, p: int
) -> tuple[np.ndarray, np.ndarray, bool, int]:
    """Variable volume, common diagonal shape: alternate the two updates.

    ``omega`` holds per-group (G, p) diagonals matched to the shape axis
    (diagonal entries of W_g for VEI, sorted eigenvalues for VEV).
    Minimises ``sum_g n_g p log lambda_g + sum_g tr(omega_g / A) / lambda_g``.
    """
    lam = omega.sum(axis=1) / (p * n_g)
    prev = np.inf
    converged = False
    it = 0
    for it in range(1, INNER_MAX_ITER + 1):
        A = _norm_det((omega / lam[:, None]).sum(axis=0))
        if not np.all(np.isfinite(A)) or np.any(A <= 0):
            break
        lam = (omega / A).sum(axis=1) / (p * n_g)
        obj = float(np.sum(n_g * p * np.log(lam)) + np.sum((omega / A).sum(axis=1) / lam))
        if np.isfinite(prev) and abs(prev - obj) <= INNER_TOL * abs(obj):
            converged = True
            break
        prev = obj
    return lam, A, converged, it


def estimate(stats: GroupScatter, structure: CovarianceStructure | str) -> CovarianceSet:
    """Weighted MLE of the group covariances under ``structure``."""
    s = CovarianceStructure(structure)
    G, p = stats.G, stats.p
    s.check_dim(p)
    n_g = stats.n_g
    n = stats.total
    W = stats.W
    eye = np.eye(p)
    scale = float(np.trace(W.sum(axis=0)) / (n * p))
    converged, inner = True, 0

    if s in (CovarianceStructure.VVV, CovarianceStructure.V):
        sigmas = W / n_g[:, None, None]
    elif s in (CovarianceStructure.EEE, CovarianceStructure.E):
        sigmas = np.repeat((W.sum(axis=0) / n)[None], G, axis=0)
    elif s is CovarianceStructure.EII:
        lam = np.trace(W.sum(axis=0)) / (n * p)
        sigmas = np.repeat((lam * eye)[None], G, axis=0)
    elif s is CovarianceStructure.VII:
        lam = np.trace(W, axis1=1, axis2=2) / (n_g * p)
        sigmas = lam[:, None, None] * eye
    elif s is CovarianceStructure.EEI:
        d = np.diagonal(W, axis1=1, axis2=2).sum(axis=0) / n
        sigmas = np.repeat(np.diag(d)[None], G, axis=0)
    elif s is CovarianceStructure.VVI:
        d = np.diagonal(W, axis1=1, axis2=2) / n_g[:, None]
        sigmas = np.einsum("gi,ij->gij", d, eye)
    elif s is CovarianceStructure.EVI:
        d = np.diagonal(W, axis1=1, axis2=2)
        with np.errstate(divide="ignore"):
            geo = np.exp(np.mean(np.log(d), axis=1))
        lam = geo.sum() / n
        sigmas = np.einsum("gi,ij->gij", lam * _norm_det(d), eye)
    elif s is CovarianceStructure.VEI:
        d = np.diagonal(W, axis1=1, axis2=2)
        lam, A, converged, inner = _alternate(n_g, d, p)
        sigmas = np.einsum("g,i,ij->gij", lam, A, eye)
    elif s is CovarianceStructure.EEV:
        vals, vecs = _sorted_eigh(W)
        total = vals.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            A = _norm_det(total)
            lam = np.exp(np.mean(np.log(total))) / n
        sigmas = lam * np.einsum("gij,j,gkj->gik", vecs, A, vecs)
    elif s is CovarianceStructure.VEV:
        vals, vecs = _sorted_eigh(W)
        vals = np.clip(vals, 0.0, None)
        lam, A, converged, inner = _alternate(n_g, vals, p)
        sigmas = np.einsum("g,gij,j,gkj->gik", lam, vecs, A, vecs)
    else:  # pragma: no cover - enum is exhaustive
        raise StructureError(str(s))

    return CovarianceSet.from_sigmas(
        s, sigmas, converged=converged, inner_iterations=inner, scale=scale
    )
