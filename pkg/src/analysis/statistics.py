"""
Correlation, residualization and permutation testing for the analysis battery.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from scipy import stats

from src.core.errors import DomainError, UndefinedCorrelationError
from src.core.prompt_templates import Strategy
from src.utils.logger import logger

_ZERO_VARIANCE_ATOL = 1e-12


class ResidualMode(str, Enum):
    NONE = "none"
    BY_STIMULUS = "by-stimulus"
    DOUBLE = "by-stimulus-then-model"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value == str(value).strip().lower():
                return member
        raise DomainError(f"Unknown residualization mode: {value!r}")


@dataclass(frozen=True)
class CorrelationReport:
    pearson_r: float
    pearson_p: float
    spearman_rho: float
    spearman_p: float
    n: int
    mode: ResidualMode


def residualize(values, groups):
    """
    Subtracts each group's mean from its members (one-way fixed effects).

    Args:
        values (sequence[float]): Observations.
        groups (sequence): Group label per observation.

    Returns:
        numpy.ndarray: Residuals; they sum to zero within every group.
    """
    series = pd.Series(np.asarray(values, dtype=float))
    labels = pd.Series(list(groups))
    if len(series) != len(labels):
        raise DomainError(f"values and group labels differ in length ({len(series)} vs {len(labels)})")
    return (series - series.groupby(labels).transform("mean")).to_numpy()


def _pearson(x, y):
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.sum(dx * dy) / math.sqrt(float(np.sum(dx * dx)) * float(np.sum(dy * dy))))
    return min(1.0, max(-1.0, r))


def _t_p_value(r, n):
    if abs(r) >= 1.0:
        return 0.0
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * stats.t.sf(abs(t_stat), n - 2))


def _constant(values):
    return bool(np.allclose(values, values[0], rtol=0.0, atol=_ZERO_VARIANCE_ATOL))


def correlate(xs, ys, mode=ResidualMode.NONE, stimulus_labels=None, model_labels=None):
    """
    Pearson and Spearman correlation, optionally after residualizing both variables.

    Args:
        xs (sequence[float]): Predictor, e.g. per-response max severity.
        ys (sequence[float]): Outcome, e.g. the same response's I value.
        mode (ResidualMode | str): none, by-stimulus, or by-stimulus-then-model.
        stimulus_labels (sequence, optional): Required for the residualized modes.
        model_labels (sequence, optional): Required for the double mode.

    Returns:
        CorrelationReport: r, rho, two-sided t-approximation p-values (n - 2 df) and n.
    """
    mode = ResidualMode.parse(mode)
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError(f"xs and ys must be equal-length sequences, got {x.shape} and {y.shape}")
    n = x.size
    if n < 3:
        raise DomainError(f"correlation needs n >= 3, got {n}")

    if mode is not ResidualMode.NONE:
        if stimulus_labels is None:
            raise DomainError(f"mode '{mode.value}' needs stimulus labels")
        x = residualize(x, stimulus_labels)
        y = residualize(y, stimulus_labels)
    if mode is ResidualMode.DOUBLE:
        if model_labels is None:
            raise DomainError(f"mode '{mode.value}' needs model labels")
        x = residualize(x, model_labels)
        y = residualize(y, model_labels)

    if _constant(x) or _constant(y):
        raise UndefinedCorrelationError("correlation is undefined when a variable has zero variance")

    r = _pearson(x, y)
    rho = _pearson(stats.rankdata(x, method="average"), stats.rankdata(y, method="average"))
    return CorrelationReport(r, _t_p_value(r, n), rho, _t_p_value(rho, n), n, mode)


def permutation_test(observed, regenerate, permutations, seed=0):
    """
    Monte Carlo permutation p-value.

    Args:
        observed (float): Statistic on the real labelling.
        regenerate (callable): Takes a numpy Generator and returns the statistic under one shuffle.
        permutations (int): Number of shuffles.
        seed (int): Base seed; shuffle k draws from the substream default_rng([seed, k]).

    Returns:
        float: (1 + #{permuted >= observed}) / (1 + permutations), in (0, 1].
    """
    if isinstance(permutations, bool) or not isinstance(permutations, int) or permutations < 1:
        raise DomainError(f"permutations must be a positive integer, got {permutations!r}")
    exceed = 0
    for index in range(permutations):
        if regenerate(np.random.default_rng([seed, index])) >= observed:
            exceed += 1
    p_value = (1 + exceed) / (1 + permutations)
    logger.debug(f"Permutation test: {exceed}/{permutations} shuffles reached {observed:.6f}; p={p_value:.6g}")
    return p_value


@dataclass(frozen=True)
class SeverityPairs:
    max_severity: tuple
    mean_severity: tuple
    indeterminacy: tuple
    stimuli: tuple
    models: tuple


def severity_indeterminacy_pairs(records):
    """Per-response (max severity, mean severity, I) with stimulus and model labels, from valid S4 rows."""
    rows = sorted(
        (r for r in records if r.strategy is Strategy.S4_TENSOR_LOSSES and r.is_valid),
        key=lambda r: r.key(),
    )
    tensors = [r.outcome.tensor for r in rows]
    return SeverityPairs(
        max_severity=tuple(t.max_severity for t in tensors),
        mean_severity=tuple(t.mean_severity for t in tensors),
        indeterminacy=tuple(t.scalar.i for t in tensors),
        stimuli=tuple(r.stimulus for r in rows),
        models=tuple(r.model for r in rows),
    )


@dataclass(frozen=True)
class CorrelationRow:
    predictor: str
    scope: str
    report: CorrelationReport


def severity_correlations(records):
    """
    Severity vs I correlations: max and mean predictors under every residualization mode across
    all models, plus one unresidualized max-severity row per model.

    Returns:
        list[CorrelationRow]: Rows whose correlation is defined; undefined ones are logged and skipped.
    """
    pairs = severity_indeterminacy_pairs(records)
    rows = []
    predictors = (("max_severity", pairs.max_severity), ("mean_severity", pairs.mean_severity))
    for name, xs in predictors:
        for mode in ResidualMode:
            try:
                report = correlate(xs, pairs.indeterminacy, mode, pairs.stimuli, pairs.models)
            except DomainError as e:
                logger.warning(f"Skipping {name} vs I ({mode.value}): {e}")
                continue
            rows.append(CorrelationRow(name, "all", report))

    for model in sorted(set(pairs.models)):
        indices = [k for k, m in enumerate(pairs.models) if m == model]
        try:
            report = correlate([pairs.max_severity[k] for k in indices], [pairs.indeterminacy[k] for k in indices])
        except DomainError as e:
            logger.warning(f"Skipping per-model max_severity vs I for {model}: {e}")
            continue
        rows.append(CorrelationRow("max_severity", model, report))
    return rows
