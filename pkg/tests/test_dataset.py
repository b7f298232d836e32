import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specsel.dataset import (
    DataError,
    Dataset,
    aggregate,
    column_index,
    load_csv,
    merge_classes,
    parse_merge_rules,
    save_csv,
    split_from_manifest,
    stratified_split,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _balanced(counts, p=3, seed=0):
    labels = np.repeat(np.arange(len(counts)), counts)
    X = np.random.default_rng(seed).standard_normal((len(labels), p))
    return Dataset(X, np.arange(p, dtype=float), labels, tuple(f"k{g}" for g in range(len(counts))))


def test_load_small_csv(tmp_path):
    f = _write(tmp_path / "d.csv", "400,402,404,label\n1,2,3,a\n4,5,6,a\n7,8,9,b\n1,1,1,b\n")
    d = load_csv(f, "label")
    assert (d.n, d.p, d.G) == (4, 3, 2)
    assert d.class_names == ("a", "b")
    np.testing.assert_array_equal(d.labels, [0, 0, 1, 1])
    np.testing.assert_array_equal(d.var_ids, [400.0, 402.0, 404.0])


def test_class_order_is_first_appearance(tmp_path):
    f = _write(tmp_path / "d.csv", "1,label\n0,zeta\n1,alpha\n2,zeta\n")
    assert load_csv(f, "label").class_names == ("zeta", "alpha")


def test_label_column_anywhere(tmp_path):
    f = _write(tmp_path / "d.csv", "label,1,2\na,0,1\nb,2,3\n")
    d = load_csv(f, "label")
    np.testing.assert_array_equal(d.values, [[0, 1], [2, 3]])


def test_non_numeric_cell_reports_position(tmp_path):
    f = _write(tmp_path / "d.csv", "1,2,label\n0,1,a\n0,x,b\n")
    with pytest.raises(DataError, match=r"row 3.*col(umn)? 2"):
        load_csv(f, "label")


def test_missing_label_is_an_error(tmp_path):
    f = _write(tmp_path / "d.csv", "1,2,label\n0,1,a\n0,1,\n")
    with pytest.raises(DataError):
        load_csv(f, "label")


def test_missing_label_column(tmp_path):
    f = _write(tmp_path / "d.csv", "1,2\n0,1\n")
    with pytest.raises(DataError):
        load_csv(f, "label")


def test_csv_roundtrip(tmp_path):
    d = _balanced([3, 4], p=5)
    save_csv(d, tmp_path / "r.csv")
    back = load_csv(tmp_path / "r.csv", "label")
    np.testing.assert_array_equal(back.values, d.values)
    np.testing.assert_array_equal(back.labels, d.labels)
    assert back.class_names == d.class_names


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 2)), [1.0, 0.5])
    with pytest.raises(DataError):
        Dataset(np.array([[np.nan, 1.0]]), [0.0, 1.0])
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 1)), [0.0], np.array([0, 0]), ("a", "b"))


def test_split_five_five():
    d = _balanced([5, 5])
    s = stratified_split(d, 0.5, seed=3)
    assert s.labeled.n == 5 and s.unlabeled.n == 5
    assert sorted(s.labeled.class_counts().tolist()) == [2, 3]


def test_split_every_class_in_labeled_part():
    d = _balanced([55, 55, 55, 32, 34])
    s = stratified_split(d, 0.5, seed=0)
    assert s.labeled.n in (115, 116)
    assert np.all(s.labeled.class_counts() >= 1)


def test_split_same_seed_same_partition():
    d = _balanced([7, 9, 4])
    a, b = stratified_split(d, 0.5, 11), stratified_split(d, 0.5, 11)
    np.testing.assert_array_equal(a.labeled_rows, b.labeled_rows)
    c = stratified_split(d, 0.5, 12)
    assert not np.array_equal(a.labeled_rows, c.labeled_rows)


def test_split_hides_truth_from_unlabeled():
    d = _balanced([4, 4])
    s = stratified_split(d, 0.5, 0)
    assert s.unlabeled.labels is None
    np.testing.assert_array_equal(s.ground_truth(), d.labels[s.unlabeled_rows])


def test_split_class_too_small():
    d = _balanced([1, 6])
    with pytest.raises(DataError, match="k0"):
        stratified_split(d, 0.5, 0)


def test_manifest_replay():
    d = _balanced([6, 5])
    s = stratified_split(d, 0.5, 4)
    again = split_from_manifest(d, json.loads(s.to_json()))
    np.testing.assert_array_equal(again.labeled.values, s.labeled.values)
    np.testing.assert_array_equal(again.ground_truth(), s.ground_truth())


@given(
    counts=st.lists(st.integers(2, 30), min_size=1, max_size=5),
    frac=st.floats(0.5, 0.9),
    seed=st.integers(0, 2**31),
)
def test_split_is_a_partition(counts, frac, seed):
    d = _balanced(counts)
    s = stratified_split(d, frac, seed)
    both = np.concatenate([s.labeled_rows, s.unlabeled_rows])
    assert len(both) == d.n
    assert len(np.unique(both)) == d.n
    per_class = s.labeled.class_counts()
    assert np.all(per_class >= 1)
    assert np.all(per_class <= np.array(counts))


def test_aggregate_identity_and_means():
    d = Dataset(np.array([[1.0, 3.0, 5.0, 7.0]]), [0.0, 1.0, 2.0, 3.0])
    assert aggregate(d, 1) is d
    np.testing.assert_array_equal(aggregate(d, 2).values, [[2.0, 6.0]])


def test_aggregate_partial_block():
    d = Dataset(np.array([[1.0, 3.0, 5.0, 7.0, 10.0]]), np.arange(5.0))
    np.testing.assert_array_equal(aggregate(d, 2).values, [[2.0, 6.0, 10.0]])


def test_aggregate_spectral_width():
    d = Dataset(np.zeros((2, 1050)), 400.0 + 2.0 * np.arange(1050))
    assert aggregate(d, 30).p == 35


def test_aggregate_level_too_large():
    d = Dataset(np.zeros((2, 3)), np.arange(3.0))
    with pytest.raises(DataError):
        aggregate(d, 4)


@given(a=st.integers(1, 6), b=st.integers(1, 6), mult=st.integers(1, 4))
def test_aggregate_composes(a, b, mult):
    p = a * b * mult
    rng = np.random.default_rng(p)
    labels = np.array([0, 1, 0, 1, 1])
    d = Dataset(rng.standard_normal((5, p)), np.arange(p, dtype=float), labels, ("x", "y"))
    twice = aggregate(aggregate(d, a), b)
    once = aggregate(d, a * b)
    assert twice.p == once.p
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
    assert twice.n == d.n
    np.testing.assert_array_equal(twice.labels, d.labels)


def test_merge_identity():
    d = _balanced([3, 2])
    m = merge_classes(d, {})
    np.testing.assert_array_equal(m.labels, d.labels)
    assert m.class_names == d.class_names


def test_merge_two_classes():
    d = Dataset(
        np.zeros((5, 1)), [0.0], np.array([0, 1, 2, 1, 0]), ("beef", "chicken", "turkey")
    )
    m = merge_classes(d, parse_merge_rules("chicken+turkey=poultry"))
    assert m.class_names == ("beef", "poultry")
    np.testing.assert_array_equal(m.labels, [0, 1, 1, 1, 0])


def test_merge_sizes_add_up():
    d = _balanced([32, 34, 55, 55, 55])
    m = merge_classes(d, {"k2": "poultry", "k3": "poultry"})
    assert m.G == 4
    assert m.class_counts()[m.class_names.index("poultry")] == 110


def test_merge_unknown_class():
    with pytest.raises(DataError):
        merge_classes(_balanced([2, 2]), {"nope": "x"})


def test_column_index():
    d = Dataset(np.zeros((1, 3)), [400.0, 402.0, 404.0])
    assert column_index(d, [404, 400]) == [2, 0]
    with pytest.raises(DataError):
        column_index(d, [401])
