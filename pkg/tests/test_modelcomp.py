import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specsel.dataset import Dataset, stratified_split
from specsel.mixture import EM_TOL, best_structure_fit
from specsel.modelcomp import Comparator, compare_add, compare_remove, regress
from specsel.synthetic import noise, planted

from conftest import as_dataset, random_classes

AFFINE_SAFE = ("E", "V", "EEE", "VVV")


def test_intercept_only_hand_calculation():
    fit = regress(np.array([-1.0, 1.0]))
    assert fit.alpha == 0.0
    assert fit.sigma2 == 1.0
    assert fit.loglik == pytest.approx(2 * (-0.5 * np.log(2 * np.pi) - 0.5), abs=1e-14)
    assert fit.d_reg == 2


def test_exact_linear_target_is_flagged(rng):
    z = rng.standard_normal(20)
    fit = regress(3.0 * z - 2.0, z)
    assert fit.near_perfect
    assert fit.sigma2 < 1e-20
    assert np.isfinite(fit.loglik)


def test_matches_normal_equations(rng):
    for _ in range(100):
        n, q = int(rng.integers(10, 60)), int(rng.integers(1, 6))
        Z = rng.standard_normal((n, q))
        y = rng.standard_normal() + Z @ rng.standard_normal(q) + rng.standard_normal(n)
        D = np.column_stack([np.ones(n), Z])
        coef = np.linalg.solve(D.T @ D, D.T @ y)
        fit = regress(y, Z)
        assert fit.alpha == pytest.approx(coef[0], abs=1e-10)
        np.testing.assert_allclose(fit.beta, coef[1:], atol=1e-10)
        resid = y - D @ coef
        assert fit.sigma2 == pytest.approx(resid @ resid / n, rel=1e-10)
        assert fit.d_reg == q + 2


def test_dependent_columns_are_dropped(rng):
    z = rng.standard_normal((30, 2))
    Z = np.column_stack([z, z[:, 0] + z[:, 1]])
    y = z @ [1.0, -1.0] + 0.1 * rng.standard_normal(30)
    fit = regress(y, Z)
    assert len(fit.dropped) == 1
    assert fit.d_reg == 4
    full = regress(y, z)
    assert fit.sigma2 == pytest.approx(full.sigma2, rel=1e-9)


def _split(seed=0, n=90, p=4):
    X, labels = random_classes(np.random.default_rng(seed), n=n, p=p)
    return stratified_split(as_dataset(X, labels), 0.5, seed)


def test_add_is_invariant_to_chosen_order():
    split = _split()
    a = compare_add(split, [2, 0], 3)
    b = compare_add(split, [0, 2], 3)
    assert a.diff == b.diff


@pytest.mark.parametrize("updating", [True, False])
def test_add_and_remove_are_opposite(updating):
    split = _split(1)
    comp = Comparator(split, updating, structures=AFFINE_SAFE)
    add = comp.compare_add([0, 1], 3)
    rem = comp.compare_remove([0, 1, 3], 3)
    assert add.diff == pytest.approx(rem.diff, abs=1e-9)
    assert rem.evidence == pytest.approx(-add.diff, abs=1e-9)


def _rescaled(split, col, a, b):
    lab, unl = split.labeled.values.copy(), split.unlabeled.values.copy()
    lab[:, col] = a * lab[:, col] + b
    unl[:, col] = a * unl[:, col] + b
    return type(split)(
        Dataset(lab, split.var_ids, split.labeled.labels, split.labeled.class_names),
        Dataset(unl, split.var_ids, None, split.labeled.class_names),
        split.seed,
        split.labeled_rows,
        split.unlabeled_rows,
    )


@given(a=st.floats(0.05, 20.0), sign=st.sampled_from([-1.0, 1.0]), b=st.floats(-50, 50))
def test_affine_rescaling_leaves_diff_unchanged(a, sign, b):
    split = _split(2)
    moved = _rescaled(split, 3, sign * a, b)
    for chosen in ([], [0]):
        before = compare_add(split, chosen, 3, updating=False, structures=AFFINE_SAFE)
        after = compare_add(moved, chosen, 3, updating=False, structures=AFFINE_SAFE)
        assert after.diff == pytest.approx(before.diff, abs=1e-6)


@given(a=st.floats(0.05, 20.0), sign=st.sampled_from([-1.0, 1.0]), b=st.floats(-50, 50))
def test_affine_rescaling_with_updating(a, sign, b):
    # EM stops on a relative loglik change, and rescaling shifts the loglik
    # by a constant, so the stopping iteration can move by one step.
    split = _split(2)
    moved = _rescaled(split, 3, sign * a, b)
    for chosen in ([], [0]):
        before = compare_add(split, chosen, 3, structures=AFFINE_SAFE)
        after = compare_add(moved, chosen, 3, structures=AFFINE_SAFE)
        slack = 1e-6 + 20 * EM_TOL * max(abs(before.bic_grouping), abs(after.bic_grouping))
        assert after.diff == pytest.approx(before.diff, abs=slack)


def test_cached_chosen_bic_equals_fresh_fit():
    split = _split(3)
    comp = Comparator(split)
    comp.compare_add([0, 2], 1)
    comp.compare_add([0, 2], 3)
    assert comp.chosen_bic([2, 0]) == best_structure_fit(split, [0, 2]).bic


def test_empty_chosen_uses_label_only_model():
    split = _split(4)
    comp = Comparator(split)
    counts = split.labeled.class_counts()
    ll = np.sum(counts * np.log(counts / counts.sum()))
    assert comp.chosen_bic([]) == pytest.approx(2 * ll - 2 * np.log(comp.n_fit))


def test_singular_grouping_gives_minus_infinity():
    labels = np.repeat([0, 1, 2], 6)
    X = np.column_stack([labels.astype(float), np.random.default_rng(0).standard_normal(18)])
    split = stratified_split(as_dataset(X, labels), 0.5, 0)
    r = compare_add(split, [], 0)
    assert r.diff == -np.inf
    assert r.structure_grouping is None


def test_remove_requires_two_chosen():
    with pytest.raises(ValueError):
        compare_remove(_split(), [1], 1)


def test_regression_rows_follow_updating():
    split = _split(5)
    assert Comparator(split, updating=True).regression(0, [1]).rows == 90
    assert Comparator(split, updating=False).regression(0, [1]).rows == split.labeled.n
    assert Comparator(split, True, regression_rows="labeled").regression(0, [1]).rows == split.labeled.n


def test_informative_pair_both_removals_rejected():
    d = planted(n=300, p=4, informative=(0, 1), seed=0)
    comp = Comparator(stratified_split(d, 0.5, 0))
    for var in (0, 1):
        assert comp.compare_remove([0, 1], var).evidence < 0


def test_independent_noise_rejected_from_empty_model():
    rejected = 0
    for seed in range(100):
        d = noise(n=120, p=1, G=3, seed=seed)
        rejected += compare_add(stratified_split(d, 0.5, seed), [], 0).diff < 0
    assert rejected >= 90


def test_independent_noise_rejected_next_to_informative_pair():
    # Same property with the two informative variables already chosen.
    rejected = 0
    for seed in range(100):
        d = planted(n=300, p=3, informative=(0, 1), seed=seed)
        rejected += compare_add(stratified_split(d, 0.5, seed), [0, 1], 2).diff < 0
    assert rejected >= 90, f"only {rejected}/100 noise additions rejected"
