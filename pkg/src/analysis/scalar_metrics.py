"""
Scalar metrics over parsed trial records: hyper-truth rates, sum dispersion, Manhattan
distances, per-cell aggregates, modal vectors, paradox positions and Absorption detection.
Every denominator counts parse-valid repetitions only.
"""

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.errors import DomainError, EmptyResultError
from src.core.neutrosophic import (
    DEFAULT_POSITION_TOLERANCE,
    EpistemicPosition,
    ScalarTIF,
    classify_position,
    is_hyper_truth,
)
from src.core.prompt_templates import Strategy
from src.core.stimuli import ORIGINAL_STUDY_SUMS
from src.utils.logger import logger


def fmean(values):
    """Correctly rounded arithmetic mean."""
    values = list(values)
    if not values:
        raise EmptyResultError("mean of an empty sequence")
    return math.fsum(values) / len(values)


def scalar_records(records, strategy=None, model=None, stimulus=None):
    """Valid records that carry a T/I/F triple, optionally filtered."""
    selected = []
    for record in records:
        if not record.is_valid or record.scalar is None:
            continue
        if strategy is not None and record.strategy is not Strategy.parse(strategy):
            continue
        if model is not None and record.model != model:
            continue
        if stimulus is not None and record.stimulus != stimulus:
            continue
        selected.append(record)
    return selected


@dataclass(frozen=True)
class Rate:
    fraction: float
    numerator: int
    denominator: int

    def render(self):
        return f"{self.numerator}/{self.denominator}"


def hyper_truth_rate(records, predicate=None):
    """
    Fraction of valid scalar records whose T + I + F exceeds 1.0.

    Args:
        records (iterable[TrialRecord]): Candidate records.
        predicate (callable, optional): Additional filter applied before counting.

    Returns:
        Rate: fraction, numerator and denominator.
    """
    pool = [r for r in scalar_records(records) if predicate is None or predicate(r)]
    if not pool:
        raise EmptyResultError("hyper-truth rate has no valid records to count")
    hits = sum(1 for r in pool if is_hyper_truth(r.scalar))
    return Rate(hits / len(pool), hits, len(pool))


def coefficient_of_variation(values):
    """
    Sample standard deviation (n - 1 denominator) divided by the mean.

    Args:
        values (list[float]): At least two values with a non-zero mean.

    Returns:
        float: The coefficient of variation.
    """
    data = np.asarray(list(values), dtype=float)
    if data.size < 2:
        raise DomainError(f"coefficient of variation needs n >= 2, got {data.size}")
    mean = fmean(data.tolist())
    if mean == 0.0:
        raise DomainError("coefficient of variation is undefined for a zero mean")
    return float(np.std(data, ddof=1) / mean)


def _triple(value):
    if isinstance(value, ScalarTIF):
        return value.as_tuple()
    t, i, f = value
    return (t, i, f)


def manhattan_distance(a, b):
    """|Ta - Tb| + |Ia - Ib| + |Fa - Fb| for two (T, I, F) triples."""
    return math.fsum(abs(x - y) for x, y in zip(_triple(a), _triple(b)))


def modal_triple(triples):
    """
    Most frequent exact triple; ties go to the lowest sum, then the lexicographically smallest.

    Args:
        triples (iterable[ScalarTIF | tuple]): Observed triples.

    Returns:
        tuple: (ScalarTIF, multiplicity).
    """
    counts = Counter(_triple(t) for t in triples)
    if not counts:
        raise EmptyResultError("modal triple of an empty sequence")
    best = min(counts.items(), key=lambda item: (-item[1], math.fsum(item[0]), item[0]))
    return ScalarTIF(*best[0]), best[1]


@dataclass(frozen=True)
class CellAggregate:
    model: str
    stimulus: str
    strategy: Strategy
    mean_t: float
    mean_i: float
    mean_f: float
    mean_sum: float
    hyper_truth_fraction: float
    valid_reps: int
    total_reps: int
    modal: ScalarTIF
    modal_count: int


def aggregate_cells(records):
    """
    Aggregates each model x stimulus x strategy cell over its valid scalar repetitions.

    Args:
        records (iterable[TrialRecord]): Parsed records.

    Returns:
        list[CellAggregate]: One entry per cell with at least one valid rep, sorted by cell key.
    """
    totals = Counter()
    valid = defaultdict(list)
    for record in records:
        key = (record.model, record.stimulus, record.strategy.value)
        totals[key] += 1
        if record.is_valid and record.scalar is not None:
            valid[key].append(record.scalar)

    aggregates = []
    for key in sorted(totals):
        scalars = valid.get(key)
        if not scalars:
            logger.warning(f"Cell {'/'.join(key)} has no valid repetitions; excluded from aggregates.")
            continue
        modal, modal_count = modal_triple(scalars)
        aggregates.append(
            CellAggregate(
                model=key[0],
                stimulus=key[1],
                strategy=Strategy.parse(key[2]),
                mean_t=fmean(s.t for s in scalars),
                mean_i=fmean(s.i for s in scalars),
                mean_f=fmean(s.f for s in scalars),
                mean_sum=fmean(s.sum for s in scalars),
                hyper_truth_fraction=sum(1 for s in scalars if is_hyper_truth(s)) / len(scalars),
                valid_reps=len(scalars),
                total_reps=totals[key],
                modal=modal,
                modal_count=modal_count,
            )
        )
    return aggregates


def mean_triple(records, model, stimulus, strategy):
    """Per-component mean over a model's valid reps for one phenomenon."""
    pool = scalar_records(records, strategy=strategy, model=model, stimulus=stimulus)
    if not pool:
        raise EmptyResultError(f"no valid {Strategy.parse(strategy).value} reps for {model}/{stimulus}")
    return (
        fmean(r.scalar.t for r in pool),
        fmean(r.scalar.i for r in pool),
        fmean(r.scalar.f for r in pool),
    )


@dataclass(frozen=True)
class ModelSummary:
    model: str
    hyper_truth: Rate
    mean_sum: float
    cv_sum: Optional[float]
    total_reps: int


def model_summary(records, strategy=Strategy.S1_NEUTROSOPHIC):
    """Per-model hyper-truth rate, mean sum and CV of sums for one strategy."""
    strategy = Strategy.parse(strategy)
    models = sorted({r.model for r in records if r.strategy is strategy})
    summaries = []
    for model in models:
        pool = scalar_records(records, strategy=strategy, model=model)
        if not pool:
            logger.warning(f"{model} has no valid {strategy.value} records; omitted from the model table.")
            continue
        sums = [r.sum for r in pool]
        try:
            cv = coefficient_of_variation(sums)
        except DomainError:
            cv = None
        summaries.append(
            ModelSummary(
                model=model,
                hyper_truth=hyper_truth_rate(pool),
                mean_sum=fmean(sums),
                cv_sum=cv,
                total_reps=sum(1 for r in records if r.model == model and r.strategy is strategy),
            )
        )
    return summaries


@dataclass(frozen=True)
class StrategyRate:
    strategy: Strategy
    rate: Rate
    mean_sum: float
    constructive: bool


def strategy_hyper_truth(records):
    """
    Hyper-truth rate per strategy. The entropy-derived strategy is flagged constructive and is
    never pooled with the others.
    """
    rows = []
    for strategy in (Strategy.S1_NEUTROSOPHIC, Strategy.S2_PROBABILISTIC,
                     Strategy.S3_ENTROPY_DERIVED, Strategy.S4_TENSOR_LOSSES):
        pool = scalar_records(records, strategy=strategy)
        if not pool:
            continue
        rows.append(
            StrategyRate(
                strategy=strategy,
                rate=hyper_truth_rate(pool),
                mean_sum=fmean(r.sum for r in pool),
                constructive=strategy is Strategy.S3_ENTROPY_DERIVED,
            )
        )
    return rows


def cross_strategy_hyper_truth(records):
    """Pooled hyper-truth rate over S1, S2 and S4; S3 is excluded because its rate is constructive."""
    return hyper_truth_rate(records, predicate=lambda r: r.strategy is not Strategy.S3_ENTROPY_DERIVED)


@dataclass(frozen=True)
class ConstraintSummary:
    model: str
    mean_sum: float
    std_sum: float
    hyper_truth_count: int
    flagged_count: int
    valid_reps: int


def constraint_table(records, strategy=Strategy.S2_PROBABILISTIC):
    """Per-model sum statistics for the probability-constrained strategy."""
    rows = []
    for model in sorted({r.model for r in scalar_records(records, strategy=strategy)}):
        pool = scalar_records(records, strategy=strategy, model=model)
        sums = np.asarray([r.sum for r in pool], dtype=float)
        rows.append(
            ConstraintSummary(
                model=model,
                mean_sum=fmean(sums.tolist()),
                std_sum=float(np.std(sums, ddof=1)) if sums.size > 1 else 0.0,
                hyper_truth_count=sum(1 for r in pool if is_hyper_truth(r.scalar)),
                flagged_count=sum(1 for r in pool if r.status == "valid_flagged"),
                valid_reps=len(pool),
            )
        )
    return rows


@dataclass(frozen=True)
class PhenomenonSum:
    stimulus: str
    category: str
    mean_sum: float
    reference_sum: Optional[float]
    delta: Optional[float]
    hyper_truth: Rate


def phenomenon_sums(records, strategy=Strategy.S1_NEUTROSOPHIC):
    """
    Mean sum per phenomenon pooled over models, next to the original single-vendor study's value.

    Returns:
        list[PhenomenonSum]: Sorted by stimulus id.
    """
    pool = scalar_records(records, strategy=strategy)
    by_stimulus = defaultdict(list)
    for record in pool:
        by_stimulus[record.stimulus].append(record)
    rows = []
    for stimulus in sorted(by_stimulus):
        members = by_stimulus[stimulus]
        mean_sum = fmean(r.sum for r in members)
        reference = ORIGINAL_STUDY_SUMS.get(stimulus)
        rows.append(
            PhenomenonSum(
                stimulus=stimulus,
                category=members[0].category,
                mean_sum=mean_sum,
                reference_sum=reference,
                delta=None if reference is None else mean_sum - reference,
                hyper_truth=hyper_truth_rate(members),
            )
        )
    return rows


@dataclass(frozen=True)
class PositionObservation:
    model: str
    rep: int
    scalar: ScalarTIF
    position: EpistemicPosition


def paradox_positions(records, stimulus="paradox", strategy=Strategy.S1_NEUTROSOPHIC,
                      tol=DEFAULT_POSITION_TOLERANCE):
    """Per-rep triples and their position labels, sorted by (model, rep)."""
    pool = scalar_records(records, strategy=strategy, stimulus=stimulus)
    observations = [PositionObservation(r.model, r.rep, r.scalar, classify_position(r.scalar, tol)) for r in pool]
    return sorted(observations, key=lambda o: (o.model, o.rep))


@dataclass(frozen=True)
class PositionSummary:
    model: str
    counts: dict
    valid_reps: int
    dominant: EpistemicPosition
    dominant_count: int
    modal: ScalarTIF
    modal_count: int
    stable: bool


def position_table(records, stimulus="paradox", strategy=Strategy.S1_NEUTROSOPHIC, tol=DEFAULT_POSITION_TOLERANCE):
    """
    Position consistency per model for one stimulus.

    Args:
        records (iterable[TrialRecord]): Parsed records.
        stimulus (str): Stimulus id, the paradox by default.
        strategy (Strategy): Strategy whose reps are classified.
        tol (float): Position tolerance.

    Returns:
        list[PositionSummary]: One row per model, sorted by slug.
    """
    by_model = defaultdict(list)
    for observation in paradox_positions(records, stimulus, strategy, tol):
        by_model[observation.model].append(observation)
    rows = []
    order = list(EpistemicPosition)
    for model in sorted(by_model):
        observations = by_model[model]
        counts = Counter(o.position for o in observations)
        dominant, dominant_count = min(counts.items(), key=lambda item: (-item[1], order.index(item[0])))
        modal, modal_count = modal_triple(o.scalar for o in observations)
        rows.append(
            PositionSummary(
                model=model,
                counts={position: counts.get(position, 0) for position in order},
                valid_reps=len(observations),
                dominant=dominant,
                dominant_count=dominant_count,
                modal=modal,
                modal_count=modal_count,
                stable=len(counts) == 1,
            )
        )
    return rows


@dataclass(frozen=True)
class AbsorptionFinding:
    model: str
    absorbed: tuple
    collapsed_groups: tuple


def detect_absorption(records, strategy=Strategy.S1_NEUTROSOPHIC, tol=DEFAULT_POSITION_TOLERANCE):
    """
    Finds phenomena whose modal vector is the Absorption vector, and distinct phenomena that
    collapse to an identical modal vector, per model.

    Returns:
        list[AbsorptionFinding]: One finding per model with at least one valid cell.
    """
    strategy = Strategy.parse(strategy)
    modal_by_model = defaultdict(dict)
    for aggregate in aggregate_cells(scalar_records(records, strategy=strategy)):
        modal_by_model[aggregate.model][aggregate.stimulus] = aggregate.modal

    findings = []
    for model in sorted(modal_by_model):
        modals = modal_by_model[model]
        absorbed = tuple(
            stimulus for stimulus in sorted(modals)
            if classify_position(modals[stimulus], tol) is EpistemicPosition.ABSORPTION
        )
        groups = defaultdict(list)
        for stimulus in sorted(modals):
            groups[modals[stimulus].as_tuple()].append(stimulus)
        collapsed = tuple(sorted(tuple(members) for members in groups.values() if len(members) > 1))
        if absorbed or collapsed:
            logger.info(f"{model}: absorbed={list(absorbed)}, collapsed={list(collapsed)}")
        findings.append(AbsorptionFinding(model, absorbed, collapsed))
    return findings
