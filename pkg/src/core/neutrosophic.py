"""
Neutrosophic data model for evaluations returned by the prompt strategies.
Holds the value types (T/I/F triples, binary estimates, declared losses) and the
per-evaluation derived quantities: sum, hyper-truth, entropy-derived indeterminacy
and the paradox position classification.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import xlogy

from src.core.errors import DomainError

BINARY_SUM_TOLERANCE = 1e-6
DEFAULT_POSITION_TOLERANCE = 0.05
_LN2 = math.log(2.0)


def _check_unit(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ScalarTIF:
    """One (T, I, F) triple. Components are independent; no sum constraint is enforced."""

    t: float
    i: float
    f: float

    def __post_init__(self):
        _check_unit("T", self.t)
        _check_unit("I", self.i)
        _check_unit("F", self.f)

    @property
    def sum(self):
        # fsum rounds once, so short decimals that add up to 1 never land above 1.0
        return math.fsum((self.t, self.i, self.f))

    def as_tuple(self):
        return (self.t, self.i, self.f)


@dataclass(frozen=True)
class BinaryEstimate:
    """P(yes)/P(no) pair produced by the entropy-derived strategy."""

    p_yes: float
    p_no: float

    def __post_init__(self):
        _check_unit("P_yes", self.p_yes)
        _check_unit("P_no", self.p_no)
        if abs(self.p_yes + self.p_no - 1.0) > BINARY_SUM_TOLERANCE:
            raise DomainError(
                f"P_yes + P_no must equal 1.0 within {BINARY_SUM_TOLERANCE}, "
                f"got {self.p_yes + self.p_no!r}"
            )


@dataclass(frozen=True)
class LossDeclaration:
    """A declared loss: what the model cannot evaluate, why, and how much it matters."""

    what: str
    why: str
    severity: float

    def __post_init__(self):
        if not isinstance(self.what, str) or not self.what.strip():
            raise DomainError("loss 'what' must be non-empty text")
        if not isinstance(self.why, str):
            raise DomainError("loss 'why' must be text")
        _check_unit("severity", self.severity)

    def to_dict(self):
        return {"what": self.what, "why": self.why, "severity": self.severity}


@dataclass(frozen=True)
class TensorEvaluation:
    """A scalar triple plus the ordered declared losses (empty for scalar-only strategies)."""

    scalar: ScalarTIF
    losses: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "losses", tuple(self.losses))
        for loss in self.losses:
            if not isinstance(loss, LossDeclaration):
                raise DomainError(f"losses must hold LossDeclaration values, got {loss!r}")

    @property
    def max_severity(self):
        return max((loss.severity for loss in self.losses), default=None)

    @property
    def mean_severity(self):
        if not self.losses:
            return None
        return float(np.mean([loss.severity for loss in self.losses]))

    def to_dict(self):
        return {
            "T": self.scalar.t,
            "I": self.scalar.i,
            "F": self.scalar.f,
            "losses": [loss.to_dict() for loss in self.losses],
        }


class EpistemicPosition(str, Enum):
    SATURATION = "Saturation"
    BALANCED_CONFLICT = "BalancedConflict"
    ABSORPTION = "Absorption"
    OTHER = "Other"


def tif_sum(s):
    """Returns T + I + F, a value in [0, 3]."""
    return s.sum


def is_hyper_truth(s):
    """True iff T + I + F strictly exceeds 1.0 (no epsilon)."""
    return s.sum > 1.0


def entropy_indeterminacy(p_yes):
    """
    Binary Shannon entropy in bits, with 0·log2(0) = 0.

    Args:
        p_yes (float): Probability that the statement is true, in [0, 1].

    Returns:
        float: H(p_yes) in [0, 1].
    """
    if isinstance(p_yes, bool) or not isinstance(p_yes, (int, float)) or not 0.0 <= p_yes <= 1.0:
        raise DomainError(f"p_yes must lie in [0, 1], got {p_yes!r}")
    p_no = 1.0 - p_yes
    bits = -(xlogy(p_yes, p_yes) + xlogy(p_no, p_no)) / _LN2
    return float(min(1.0, max(0.0, bits)))


def s3_to_tif(b):
    """Maps a binary estimate onto (T=P_yes, I=H(P_yes), F=P_no)."""
    return ScalarTIF(t=b.p_yes, i=entropy_indeterminacy(b.p_yes), f=b.p_no)


def classify_position(s, tol=DEFAULT_POSITION_TOLERANCE):
    """
    Classifies a triple against the three paradox templates.

    Saturation (0.5, 1.0, 0.5), Balanced Conflict (0.5, 0.5, 0.5) and Absorption
    (0, 1, 0) are checked in that order; the first match wins.

    Args:
        s (ScalarTIF): The evaluation to classify.
        tol (float): Per-component tolerance in [0, 0.25).

    Returns:
        EpistemicPosition: Exactly one label.
    """
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not 0.0 <= tol < 0.25:
        raise DomainError(f"position tolerance must lie in [0, 0.25), got {tol!r}")

    def near(value, target):
        return abs(value - target) <= tol

    if near(s.t, 0.5) and near(s.i, 1.0) and near(s.f, 0.5):
        return EpistemicPosition.SATURATION
    if near(s.t, 0.5) and near(s.i, 0.5) and near(s.f, 0.5):
        return EpistemicPosition.BALANCED_CONFLICT
    if s.t <= tol and s.f <= tol and s.i >= 1.0 - tol:
        return EpistemicPosition.ABSORPTION
    return EpistemicPosition.OTHER
