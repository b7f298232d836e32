"""Stepwise variable selection: greedy (best improvement) and headlong
(first improvement) add/remove alternation."""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset import LabeledSplit
from .mixture import MixtureModel
from .modelcomp import Comparator, ComparisonResult

log = logging.getLogger(__name__)

STRATEGIES = ("greedy", "headlong")
ORDERINGS = ("bic-rank", "ascending", "descending")


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "headlong"
    min_evidence: float = 0.0
    updating: bool = True
    max_selected: int | None = None
    max_iterations: int = 1000
    ordering: str = "bic-rank"
    structures: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        if math.isnan(self.min_evidence) or self.min_evidence == -math.inf:
            raise ValueError("min_evidence must be a number above -inf")
        if self.max_selected is not None and self.max_selected < 1:
            raise ValueError("max_selected must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class TraceRecord:
    """One add or remove phase, in the layout of a stepwise decision table.

    ``var_id`` is the accepted variable, or for a rejected phase the
    candidate with the most evidence among those checked (``None`` when
    nothing could be checked).  ``bic_diff`` is the evidence for the action.
    """

    iteration: int
    phase: str
    var_id: float | None
    bic_diff: float | None
    structure: str | None
    decision: str
    checked: int = 0

    def to_json(self) -> str:
        data = asdict(self)
        if data["bic_diff"] is not None and not math.isfinite(data["bic_diff"]):
            data["bic_diff"] = str(data["bic_diff"])
        return json.dumps(data, sort_keys=True)


@dataclass
class SelectionState:
    """Mutable search state, owned by a single search run."""

    chosen: list[int]
    remaining: deque
    var_ids: np.ndarray
    trace: list[TraceRecord] = field(default_factory=list)
    consecutive_rejections: int = 0
    current_model: MixtureModel | None = None
    iteration: int = 0
    terminated: bool = False
    hit_iteration_cap: bool = False
    univariate: dict[int, float] = field(default_factory=dict)

    @property
    def chosen_ids(self) -> list[float]:
        return [float(self.var_ids[c]) for c in self.chosen]

    def record(self, phase: str, result: ComparisonResult | None, accepted: bool, checked: int):
        if result is None:
            rec = TraceRecord(self.iteration, phase, None, None, None, "rejected", checked)
        else:
            structure = (
                result.structure_grouping if result.kind == "add" else result.structure_nogrouping
            )
            rec = TraceRecord(
                self.iteration,
                phase,
                float(self.var_ids[result.variable]),
                float(result.evidence),
                None if structure is None else str(structure),
                "accepted" if accepted else "rejected",
                checked,
            )
        self.trace.append(rec)
        log.debug("%s", rec)
        if accepted:
            self.consecutive_rejections = 0
        else:
            self.consecutive_rejections += 1


def _evidence(result: ComparisonResult) -> float:
    e = result.evidence
    return -math.inf if math.isnan(e) else e


def _best(results: list[ComparisonResult]) -> ComparisonResult | None:
    # first maximum wins, so list order breaks ties
    best = None
    for r in results:
        if best is None or _evidence(r) > _evidence(best):
            best = r
    return best


def initial_ranking(
    split: LabeledSplit, config: SearchConfig, comparator: Comparator | None = None
) -> SelectionState:
    """Univariate comparisons for every variable; adds the best one if it
    clears ``min_evidence``."""
    comp = comparator or Comparator(split, config.updating, config.structures)
    p = split.labeled.p
    if p < 1:
        raise ValueError("no variables to select from")
    base = comp.chosen_bic(())
    results = [comp.compare_add((), j, base) for j in range(p)]
    diffs = {r.variable: _evidence(r) for r in results}
    # stable sort: equal evidence keeps the lower var_id first
    ranked = sorted(range(p), key=lambda j: -diffs[j])
    first = ranked[0]

    if config.ordering == "bic-rank":
        order = ranked
    elif config.ordering == "ascending":
        order = list(range(p))
    else:
        order = list(range(p - 1, -1, -1))

    state = SelectionState(chosen=[], remaining=deque(order), var_ids=split.var_ids, univariate=diffs)
    accepted = diffs[first] > config.min_evidence
    if accepted:
        state.chosen.append(first)
        state.remaining.remove(first)
        state.current_model = comp.grouping_fit(state.chosen)
    state.record("add", results[first], accepted, checked=p)
    # the initial step does not count towards the stopping rule
    state.consecutive_rejections = 0
    return state


def _at_cap(state: SelectionState, config: SearchConfig) -> bool:
    return config.max_selected is not None and len(state.chosen) >= config.max_selected


def _accept_add(state: SelectionState, comp: Comparator, var: int):
    state.chosen.append(var)
    state.current_model = comp.grouping_fit(state.chosen)


def _accept_remove(state: SelectionState, comp: Comparator, var: int):
    state.chosen.remove(var)
    state.remaining.append(var)
    state.current_model = comp.grouping_fit(state.chosen)


def _headlong_add(state, comp, config):
    if _at_cap(state, config) or not state.remaining:
        state.record("add", None, False, 0)
        return
    base = comp.chosen_bic(state.chosen)
    checked: list[ComparisonResult] = []
    for _ in range(len(state.remaining)):
        var = state.remaining.popleft()
        result = comp.compare_add(state.chosen, var, base)
        checked.append(result)
        if _evidence(result) > config.min_evidence:
            _accept_add(state, comp, var)
            state.record("add", result, True, len(checked))
            return
        state.remaining.append(var)
    state.record("add", _best(checked), False, len(checked))


def _headlong_remove(state, comp, config):
    if len(state.chosen) < 2:
        state.record("remove", None, False, 0)
        return
    checked: list[ComparisonResult] = []
    for var in reversed(list(state.chosen)):
        result = comp.compare_remove(state.chosen, var)
        checked.append(result)
        if _evidence(result) > config.min_evidence:
            _accept_remove(state, comp, var)
            state.record("remove", result, True, len(checked))
            return
    state.record("remove", _best(checked), False, len(checked))


def _greedy_add(state, comp, config):
    if _at_cap(state, config) or not state.remaining:
        state.record("add", None, False, 0)
        return
    base = comp.chosen_bic(state.chosen)
    results = [comp.compare_add(state.chosen, v, base) for v in state.remaining]
    best = _best(results)
    if _evidence(best) > config.min_evidence:
        state.remaining.remove(best.variable)
        _accept_add(state, comp, best.variable)
        state.record("add", best, True, len(results))
    else:
        state.record("add", best, False, len(results))


def _greedy_remove(state, comp, config):
    if len(state.chosen) < 2:
        state.record("remove", None, False, 0)
        return
    results = [comp.compare_remove(state.chosen, v) for v in reversed(list(state.chosen))]
    best = _best(results)
    if _evidence(best) > config.min_evidence:
        _accept_remove(state, comp, best.variable)
        state.record("remove", best, True, len(results))
    else:
        state.record("remove", best, False, len(results))


def _step(add, remove, state, comp, config) -> SelectionState:
    """One iteration: an add phase then a remove phase, honouring the
    two-consecutive-rejections stop after each phase."""
    state.iteration += 1
    add(state, comp, config)
    if state.consecutive_rejections >= 2:
        state.terminated = True
        return state
    remove(state, comp, config)
    if state.consecutive_rejections >= 2:
        state.terminated = True
    return state


def headlong_step(
    state: SelectionState, split: LabeledSplit, config: SearchConfig, comparator: Comparator | None = None
) -> SelectionState:
    comp = comparator or Comparator(split, config.updating, config.structures)
    return _step(_headlong_add, _headlong_remove, state, comp, config)


def greedy_step(
    state: SelectionState, split: LabeledSplit, config: SearchConfig, comparator: Comparator | None = None
) -> SelectionState:
    comp = comparator or Comparator(split, config.updating, config.structures)
    return _step(_greedy_add, _greedy_remove, state, comp, config)


@dataclass(frozen=True)
class SearchResult:
    state: SelectionState
    model: MixtureModel | None
    n_fits: int

    @property
    def selected(self) -> list[float]:
        return self.state.chosen_ids

    @property
    def trace(self) -> list[TraceRecord]:
        return self.state.trace


def run(split: LabeledSplit, config: SearchConfig | None = None) -> SearchResult:
    """Full stepwise search; stops after two consecutive rejected phases."""
    config = config or SearchConfig()
    comp = Comparator(split, config.updating, config.structures)
    state = initial_ranking(split, config, comp)
    step = greedy_step if config.strategy == "greedy" else headlong_step
    while not state.terminated:
        if state.iteration >= config.max_iterations:
            state.hit_iteration_cap = True
            log.warning("iteration cap %d reached", config.max_iterations)
            break
        step(state, split, config, comp)
    model = comp.grouping_fit(state.chosen) if state.chosen else None
    state.current_model = model
    return SearchResult(state=state, model=model, n_fits=comp.n_fits)


def replay_chosen(trace: Sequence[TraceRecord]) -> list[float]:
    """Chosen var_ids implied by the accepted records of a trace."""
    chosen: list[float] = []
    for rec in trace:
        if rec.decision != "accepted":
            continue
        if rec.phase == "add":
            chosen.append(rec.var_id)
        else:
            chosen.remove(rec.var_id)
    return chosen

