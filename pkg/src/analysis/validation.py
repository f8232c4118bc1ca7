"""
Validation tests for the tensor protocol: the tautology control (does indeterminacy drop for
statements with nothing to be uncertain about?) and variance compression of I between the
scalar strategies and the tensor strategy.
"""

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from src.analysis.loss_vocabulary import tensor_records
from src.analysis.scalar_metrics import fmean, scalar_records
from src.core.errors import EmptyResultError
from src.core.prompt_templates import Strategy
from src.utils.logger import logger

SCALAR_STRATEGIES = (Strategy.S1_NEUTROSOPHIC, Strategy.S2_PROBABILISTIC, Strategy.S3_ENTROPY_DERIVED)


@dataclass(frozen=True)
class TensorMeans:
    indeterminacy: float
    max_severity: float
    losses_per_rep: float
    valid_reps: int


def tensor_means(records):
    """Mean I, mean per-rep max severity and losses per rep over valid S4 records."""
    pool = tensor_records(records)
    if not pool:
        raise EmptyResultError("no valid S4 records to average")
    tensors = [r.outcome.tensor for r in pool]
    return TensorMeans(
        indeterminacy=fmean(t.scalar.i for t in tensors),
        max_severity=fmean(t.max_severity for t in tensors),
        losses_per_rep=sum(len(t.losses) for t in tensors) / len(tensors),
        valid_reps=len(tensors),
    )


def _ratio(numerator, denominator):
    if denominator == 0.0:
        return 1.0 if numerator == 0.0 else math.inf
    return numerator / denominator


@dataclass(frozen=True)
class TautologyComparison:
    original: TensorMeans
    tautology: TensorMeans
    indeterminacy_ratio: float
    max_severity_ratio: float
    losses_per_rep_ratio: float


def tautology_comparison(original_records, tautology_records):
    """
    Ratios of tautology means over original-stimulus means (I, max severity, losses per rep).

    Args:
        original_records (iterable[TrialRecord]): S4 records on the original stimuli.
        tautology_records (iterable[TrialRecord]): S4 records on the tautologies.

    Returns:
        TautologyComparison: Both sets of means and the three ratios.
    """
    original = tensor_means(original_records)
    tautology = tensor_means(tautology_records)
    comparison = TautologyComparison(
        original=original,
        tautology=tautology,
        indeterminacy_ratio=_ratio(tautology.indeterminacy, original.indeterminacy),
        max_severity_ratio=_ratio(tautology.max_severity, original.max_severity),
        losses_per_rep_ratio=_ratio(tautology.losses_per_rep, original.losses_per_rep),
    )
    logger.info(
        f"Tautology control: I ratio {comparison.indeterminacy_ratio:.3f}, "
        f"max severity ratio {comparison.max_severity_ratio:.3f}."
    )
    return comparison


def indeterminacy_by_phenomenon(records):
    """
    Splits valid I values per phenomenon into the pooled scalar strategies (S3 contributes its
    entropy-derived I) and the tensor strategy.

    Returns:
        tuple[dict, dict]: (S1-S3 values per stimulus, S4 values per stimulus).
    """
    scalar_values = defaultdict(list)
    tensor_values = defaultdict(list)
    for record in sorted(scalar_records(records), key=lambda r: r.key()):
        if record.strategy in SCALAR_STRATEGIES:
            scalar_values[record.stimulus].append(record.scalar.i)
        elif record.strategy is Strategy.S4_TENSOR_LOSSES:
            tensor_values[record.stimulus].append(record.scalar.i)
    return dict(scalar_values), dict(tensor_values)


@dataclass(frozen=True)
class VarianceCompression:
    stimulus: str
    scalar_variance: float
    tensor_variance: float
    ratio: float
    infinite: bool
    scalar_n: int
    tensor_n: int


def variance_compression(scalar_values, tensor_values):
    """
    Sample variance of pooled S1-S3 I values divided by that of S4 I values, per phenomenon.

    Args:
        scalar_values (dict): stimulus -> I values under S1-S3.
        tensor_values (dict): stimulus -> I values under S4.

    Returns:
        list[VarianceCompression]: One row per phenomenon with at least two values on each side;
        zero tensor variance gives an infinite ratio with the flag set.
    """
    rows = []
    for stimulus in sorted(set(scalar_values) & set(tensor_values)):
        left = np.asarray(scalar_values[stimulus], dtype=float)
        right = np.asarray(tensor_values[stimulus], dtype=float)
        if left.size < 2 or right.size < 2:
            logger.warning(f"Variance compression for '{stimulus}' needs two values per side; skipped.")
            continue
        scalar_variance = float(np.var(left, ddof=1))
        tensor_variance = float(np.var(right, ddof=1))
        ratio = _ratio(scalar_variance, tensor_variance)
        rows.append(
            VarianceCompression(
                stimulus=stimulus,
                scalar_variance=scalar_variance,
                tensor_variance=tensor_variance,
                ratio=ratio,
                infinite=math.isinf(ratio),
                scalar_n=int(left.size),
                tensor_n=int(right.size),
            )
        )
    if not rows:
        raise EmptyResultError("no phenomenon has both S1-S3 and S4 indeterminacy values")
    return rows
