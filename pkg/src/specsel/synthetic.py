"""Synthetic datasets with known discriminating structure."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset


def planted(
    n: int = 300,
    p: int = 25,
    G: int = 3,
    informative: tuple[int, ...] = (3, 11),
    separation: float = 4.0,
    seed: int = 0,
) -> Dataset:
    """Unit-variance Gaussian noise with class means shifted on a few columns.

    Class ``g`` has mean ``separation * ((g + j) mod G)`` on the ``j``-th
    informative column, so no two classes share a mean on any informative
    column and every pair is at least ``separation`` apart on each of them.
    Classes are balanced and row order is shuffled.
    """
    if any(not 0 <= j < p for j in informative):
        raise ValueError(f"informative columns {informative} out of range for p = {p}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % G)
    X = rng.standard_normal((n, p))
    k = len(informative)
    shift = (np.arange(G)[:, None] + np.arange(k)[None, :]) % G
    centres = separation * shift.astype(float)
    X[:, list(informative)] += centres[labels]
    names = tuple(f"class{g}" for g in range(G))
    return Dataset(X, np.arange(p, dtype=float), labels, names)


def noise(n: int = 100, p: int = 10, G: int = 3, seed: int = 0) -> Dataset:
    """Pure Gaussian noise with randomly shuffled balanced labels."""
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % G)
    X = rng.standard_normal((n, p))
    return Dataset(X, np.arange(p, dtype=float), labels, tuple(f"class{g}" for g in range(G)))


def peaked_spectra(
    n: int = 90,
    p: int = 420,
    G: int = 3,
    peak_width: float = 2.0,
    amplitude: float = 1.5,
    baseline_sd: float = 2.0,
    noise_sd: float = 0.5,
    seed: int = 0,
) -> Dataset:
    """Smooth random spectra where each class carries a narrow extra peak.

    Every sample has a random broad baseline (shared smooth shape with a
    per-sample amplitude) plus channel noise.  Class ``g`` adds a Gaussian
    peak of ``peak_width`` channels at its own position, so the class
    signal is local and gets diluted once many channels are averaged.
    """
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % G)
    grid = np.arange(p, dtype=float)
    broad = np.exp(-0.5 * ((grid - 0.4 * p) / (0.25 * p)) ** 2)
    broad2 = np.sin(2 * np.pi * grid / p)
    X = (
        baseline_sd * rng.standard_normal((n, 1)) * broad
        + baseline_sd * rng.standard_normal((n, 1)) * broad2
        + noise_sd * rng.standard_normal((n, p))
    )
    centres = (np.arange(G) + 1) * p / (G + 1)
    for g in range(G):
        peak = amplitude * np.exp(-0.5 * ((grid - centres[g]) / peak_width) ** 2)
        X[labels == g] += peak
    var_ids = 400.0 + 2.0 * grid
    return Dataset(X, var_ids, labels, tuple(f"class{g}" for g in range(G)))
