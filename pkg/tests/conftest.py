import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from specsel.dataset import Dataset

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=40
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_classes(rng, n=40, p=3, G=3, spread=3.0):
    """Balanced labels with random class means and correlated noise."""
    labels = rng.permutation(np.arange(n) % G)
    mix = rng.standard_normal((p, p)) + 2.0 * np.eye(p)
    X = rng.standard_normal((n, p)) @ mix + spread * rng.standard_normal((G, p))[labels]
    return X, labels


def as_dataset(X, labels, G=None):
    G = int(labels.max()) + 1 if G is None else G
    return Dataset(X, np.arange(X.shape[1], dtype=float), labels, tuple(f"c{g}" for g in range(G)))
