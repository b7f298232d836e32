import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specsel.dataset import Dataset, stratified_split
from specsel.modelcomp import Comparator
from specsel.search import (
    SearchConfig,
    greedy_step,
    headlong_step,
    initial_ranking,
    replay_chosen,
    run,
)
from specsel.synthetic import noise, planted


def _split(d, seed=0):
    return stratified_split(d, 0.5, seed)


def test_single_informative_variable_ranks_first():
    d = planted(n=150, p=10, informative=(6,), seed=1)
    state = initial_ranking(_split(d), SearchConfig())
    assert state.chosen == [6]
    assert state.trace[0].decision == "accepted"
    assert state.trace[0].structure in ("E", "V")
    assert list(state.remaining)[0] != 6


def test_identical_columns_tie_to_earlier_id():
    d = planted(n=150, p=5, informative=(2,), seed=2)
    X = d.values.copy()
    X[:, 4] = X[:, 2]
    twin = Dataset(X, d.var_ids, d.labels, d.class_names)
    state = initial_ranking(_split(twin), SearchConfig())
    assert state.chosen == [2]


def test_infinite_threshold_stops_after_two_rejections():
    d = planted(n=90, p=6, informative=(1, 2), seed=3)
    result = run(_split(d), SearchConfig(min_evidence=math.inf))
    assert result.selected == []
    assert [r.decision for r in result.trace] == ["rejected"] * 3
    assert len(result.trace) == 3
    assert result.state.terminated


def test_no_signal_gives_empty_model():
    d = noise(n=120, p=6, seed=4)
    result = run(_split(d), SearchConfig())
    assert result.selected == []
    assert result.model is None
    assert result.state.iteration <= 1


@pytest.mark.parametrize("step", [headlong_step, greedy_step])
def test_all_rejected_state_terminates(step):
    d = noise(n=120, p=5, seed=5)
    split = _split(d)
    config = SearchConfig()
    comp = Comparator(split)
    state = initial_ranking(split, config, comp)
    # no univariate signal: nothing chosen, every add is negative and there
    # is nothing to remove
    assert state.chosen == [] and max(state.univariate.values()) < 0
    step(state, split, config, comp)
    assert state.terminated
    assert state.iteration == 1
    assert state.trace[-1].decision == "rejected"
    assert state.trace[-2].decision == "rejected"


@settings(max_examples=8)
@given(seed=st.integers(0, 10_000))
def test_greedy_and_headlong_pick_same_first_variable(seed):
    d = planted(n=90, p=6, informative=(1, 4), seed=seed)
    split = _split(d, seed)
    a = run(split, SearchConfig(strategy="headlong", max_iterations=1))
    b = run(split, SearchConfig(strategy="greedy", max_iterations=1))
    assert a.trace[0] == b.trace[0]


def test_headlong_accepts_first_improving_candidate():
    d = planted(n=150, p=6, informative=(0, 5), seed=6)
    split = _split(d)
    config = SearchConfig(ordering="ascending")
    comp = Comparator(split)
    state = initial_ranking(split, config, comp)
    first = state.chosen[0]
    headlong_step(state, split, config, comp)
    add = state.trace[1]
    queue = [v for v in range(6) if v != first]
    diffs = [comp.compare_add([first], v).diff for v in queue]
    k = next(i for i, x in enumerate(diffs) if x > 0)
    assert add.var_id == float(queue[k])
    assert add.checked == k + 1


def test_greedy_accepts_argmax():
    d = planted(n=150, p=6, informative=(0, 5), seed=6)
    split = _split(d)
    config = SearchConfig(strategy="greedy")
    comp = Comparator(split)
    state = initial_ranking(split, config, comp)
    first = state.chosen[0]
    greedy_step(state, split, config, comp)
    diffs = {v: comp.compare_add([first], v).diff for v in range(6) if v != first}
    assert state.trace[1].var_id == float(max(diffs, key=diffs.get))
    assert state.trace[1].checked == 5


def test_max_selected_caps_the_model():
    d = planted(n=150, p=8, informative=(1, 2), seed=7)
    result = run(_split(d), SearchConfig(max_selected=1))
    assert len(result.selected) == 1
    assert result.state.terminated


def test_iteration_cap_is_flagged():
    d = planted(n=150, p=8, informative=(1, 2), seed=7)
    result = run(_split(d), SearchConfig(max_iterations=1))
    assert result.state.hit_iteration_cap
    assert result.state.iteration == 1


@pytest.mark.parametrize("strategy", ["headlong", "greedy"])
def test_trace_invariants(strategy):
    d = planted(n=120, p=7, informative=(2, 3), seed=8)
    config = SearchConfig(strategy=strategy, min_evidence=0.5)
    result = run(_split(d), config)
    for rec in result.trace:
        if rec.decision == "accepted":
            assert rec.bic_diff > config.min_evidence
        elif rec.bic_diff is not None:
            assert rec.bic_diff <= config.min_evidence
    assert len(set(result.selected)) == len(result.selected)
    assert replay_chosen(result.trace) == result.selected
    assert len(result.trace) <= 1 + 2 * config.max_iterations
    assert sorted(result.model.cols) == sorted(int(v) for v in result.selected)


def test_replay_is_byte_identical():
    d = planted(n=120, p=6, informative=(1, 3), seed=9)
    split = _split(d, 9)
    a = [r.to_json() for r in run(split, SearchConfig()).trace]
    b = [r.to_json() for r in run(_split(d, 9), SearchConfig()).trace]
    assert a == b


def test_trace_json_fields():
    d = planted(n=90, p=4, informative=(0, 1), seed=10)
    rec = run(_split(d), SearchConfig()).trace[0]
    data = json.loads(rec.to_json())
    assert {"iteration", "phase", "var_id", "bic_diff", "structure", "decision"} <= set(data)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(strategy="random")
    with pytest.raises(ValueError):
        SearchConfig(ordering="sideways")
    with pytest.raises(ValueError):
        SearchConfig(min_evidence=float("nan"))
    with pytest.raises(ValueError):
        SearchConfig(max_selected=0)


def test_informative_pair_removal_rejected_in_trace():
    d = planted(n=300, p=4, informative=(0, 1), seed=11)
    result = run(_split(d), SearchConfig(strategy="greedy", max_iterations=1))
    rem = [r for r in result.trace if r.phase == "remove"]
    assert rem and rem[0].decision == "rejected"


def test_greedy_recovers_exactly_the_planted_pair():
    d = planted(n=300, p=10, informative=(3, 7), seed=12)
    result = run(_split(d), SearchConfig(strategy="greedy"))
    assert sorted(result.selected) == [3.0, 7.0], f"selected {result.selected}"
