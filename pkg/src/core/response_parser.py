"""
Parses raw completion text into typed evaluations for each prompt strategy.
Content problems never raise: they come back as Failure outcomes (garbled, truncated,
out of range, missing field, constraint violated) so that bad output is kept as data.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from src.core.neutrosophic import (
    BINARY_SUM_TOLERANCE,
    BinaryEstimate,
    LossDeclaration,
    ScalarTIF,
    TensorEvaluation,
    is_hyper_truth,
    s3_to_tif,
)
from src.core.prompt_templates import Strategy
from src.utils.logger import logger

PROBABILITY_SUM_TOLERANCE = 0.01


class FailureKind(str, Enum):
    GARBLED = "Garbled"
    TRUNCATED = "Truncated"
    OUT_OF_RANGE = "OutOfRange"
    MISSING_FIELD = "MissingField"
    CONSTRAINT_VIOLATED = "ConstraintViolated"

    @property
    def status(self):
        return _FAILURE_STATUS[self]


_FAILURE_STATUS = {
    FailureKind.GARBLED: "garbled",
    FailureKind.TRUNCATED: "truncated",
    FailureKind.OUT_OF_RANGE: "out_of_range",
    FailureKind.MISSING_FIELD: "missing_field",
    FailureKind.CONSTRAINT_VIOLATED: "constraint_violated",
}
STATUS_TO_FAILURE = {status: kind for kind, status in _FAILURE_STATUS.items()}
VALID_STATUSES = ("valid", "valid_flagged")


@dataclass(frozen=True)
class ValidScalar:
    scalar: ScalarTIF
    constraint_violated: bool = False

    is_valid = True

    @property
    def status(self):
        return "valid_flagged" if self.constraint_violated else "valid"

    @property
    def detail(self):
        return "T + I + F deviates from 1.0 by more than 0.01" if self.constraint_violated else ""


@dataclass(frozen=True)
class ValidBinary:
    estimate: BinaryEstimate

    is_valid = True
    status = "valid"
    detail = ""

    @property
    def scalar(self):
        return s3_to_tif(self.estimate)


@dataclass(frozen=True)
class ValidTensor:
    tensor: TensorEvaluation

    is_valid = True
    status = "valid"
    detail = ""

    @property
    def scalar(self):
        return self.tensor.scalar


@dataclass(frozen=True)
class ValidFreeText:
    text: str

    is_valid = True
    status = "valid"
    detail = ""
    scalar = None


@dataclass(frozen=True)
class Failure:
    kind: FailureKind
    detail: str

    is_valid = False
    scalar = None

    @property
    def status(self):
        return self.kind.status


class _Rejected(Exception):
    def __init__(self, kind, detail):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


def _scan_spans(text):
    """
    Yields (start, end) for each top-level brace-balanced span, left to right.
    An opening brace that is never closed yields (start, None) and ends the scan.
    Braces inside JSON string literals are ignored.
    """
    position = 0
    length = len(text)
    while position < length:
        start = text.find("{", position)
        if start < 0:
            return
        depth = 0
        in_string = False
        escaped = False
        for index in range(start, length):
            char = text[index]
            if in_string:
                if escaped:
                    escaped = False
                elif char == "\\":
                    escaped = True
                elif char == '"':
                    in_string = False
                continue
            if char == '"':
                in_string = True
            elif char == "{":
                depth += 1
            elif char == "}":
                depth -= 1
                if depth == 0:
                    yield start, index + 1
                    position = index + 1
                    break
        else:
            yield start, None
            return


def _decode_object(span):
    try:
        value = json.loads(span)
    except (ValueError, RecursionError):
        return None
    return value if isinstance(value, dict) else None


def extract_json_span(text):
    """
    Finds the JSON object in a completion that may carry prose or markdown fences around it.

    Args:
        text (str): Raw completion text.

    Returns:
        str | None: The first balanced top-level {...} span that decodes to a JSON object,
        else the first balanced span, else None when no balanced object exists.
    """
    if not text:
        return None
    first_balanced = None
    for start, end in _scan_spans(text):
        if end is None:
            break
        span = text[start:end]
        if _decode_object(span) is not None:
            return span
        if first_balanced is None:
            first_balanced = span
    return first_balanced


def _locate_object(text):
    """Returns the decoded object, or raises _Rejected with Truncated/Garbled."""
    unclosed_at = None
    invalid_at = None
    for start, end in _scan_spans(text):
        if end is None:
            unclosed_at = start
            break
        decoded = _decode_object(text[start:end])
        if decoded is not None:
            return decoded
        if invalid_at is None:
            invalid_at = start
    if unclosed_at is not None:
        raise _Rejected(FailureKind.TRUNCATED, f"unbalanced '{{' at offset {unclosed_at}, response ends at {len(text)}")
    if invalid_at is not None:
        raise _Rejected(FailureKind.GARBLED, f"braced span at offset {invalid_at} is not a JSON object")
    if not text.strip():
        raise _Rejected(FailureKind.GARBLED, "empty response")
    raise _Rejected(FailureKind.GARBLED, "no JSON object in response")


def _unit_field(obj, key, path=None):
    name = path or key
    if key not in obj:
        raise _Rejected(FailureKind.MISSING_FIELD, f"missing key '{name}'")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _Rejected(FailureKind.MISSING_FIELD, f"'{name}' is not numeric: {str(value)[:40]!r}")
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise _Rejected(FailureKind.OUT_OF_RANGE, f"'{name}' = {value!r} outside [0, 1]")
    return float(value)


def _scalar_from(obj):
    return ScalarTIF(_unit_field(obj, "T"), _unit_field(obj, "I"), _unit_field(obj, "F"))


def _losses_from(obj):
    if "losses" not in obj:
        raise _Rejected(FailureKind.MISSING_FIELD, "missing key 'losses'")
    raw_losses = obj["losses"]
    if not isinstance(raw_losses, list):
        raise _Rejected(FailureKind.MISSING_FIELD, "'losses' is not an array")
    if not raw_losses:
        raise _Rejected(FailureKind.MISSING_FIELD, "losses empty")
    losses = []
    for index, item in enumerate(raw_losses):
        prefix = f"losses[{index}]"
        if not isinstance(item, dict):
            raise _Rejected(FailureKind.MISSING_FIELD, f"{prefix} is not an object")
        what = item.get("what")
        if not isinstance(what, str) or not what.strip():
            raise _Rejected(FailureKind.MISSING_FIELD, f"missing key '{prefix}.what'")
        why = item.get("why")
        if not isinstance(why, str):
            raise _Rejected(FailureKind.MISSING_FIELD, f"missing key '{prefix}.why'")
        severity = _unit_field(item, "severity", f"{prefix}.severity")
        losses.append(LossDeclaration(what=what, why=why, severity=severity))
    return tuple(losses)


def _parse(text, strategy):
    if strategy is Strategy.S5_ABLATION:
        return ValidFreeText(text)
    obj = _locate_object(text)

    if strategy is Strategy.S3_ENTROPY_DERIVED:
        p_yes = _unit_field(obj, "P_yes")
        p_no = _unit_field(obj, "P_no")
        if abs(p_yes + p_no - 1.0) > BINARY_SUM_TOLERANCE:
            raise _Rejected(FailureKind.CONSTRAINT_VIOLATED, f"P_yes + P_no = {p_yes + p_no!r}, expected 1.0")
        return ValidBinary(BinaryEstimate(p_yes, p_no))

    scalar = _scalar_from(obj)
    if strategy is Strategy.S4_TENSOR_LOSSES:
        return ValidTensor(TensorEvaluation(scalar, _losses_from(obj)))
    if strategy is Strategy.S2_PROBABILISTIC:
        return ValidScalar(scalar, constraint_violated=abs(scalar.sum - 1.0) > PROBABILITY_SUM_TOLERANCE)
    return ValidScalar(scalar)


def parse_trial(text, strategy):
    """
    Parses one completion according to the response shape its strategy asks for.

    Args:
        text (str | bytes | None): Raw completion content; bytes are decoded as UTF-8 with replacement.
        strategy (Strategy | str): Strategy the completion answers.

    Returns:
        ValidScalar | ValidBinary | ValidTensor | ValidFreeText | Failure: Exactly one outcome.
    """
    strategy = Strategy.parse(strategy)
    if text is None:
        text = ""
    elif isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    try:
        return _parse(str(text), strategy)
    except _Rejected as rejected:
        logger.debug(f"{strategy.value} parse failure: {rejected.kind.value} ({rejected.detail})")
        return Failure(rejected.kind, rejected.detail)
    except Exception as e:  # the parser is total; anything unexpected is garbled output
        logger.debug(f"{strategy.value} parse failure: unexpected {type(e).__name__}: {e}")
        return Failure(FailureKind.GARBLED, f"unparseable response ({type(e).__name__})")


@dataclass(frozen=True)
class TrialRecord:
    """One model x stimulus x strategy x repetition outcome."""

    model: str
    provider: str
    stimulus: str
    category: str
    strategy: Strategy
    rep: int
    outcome: object
    raw_text: str = ""

    @property
    def is_valid(self):
        return self.outcome.is_valid

    @property
    def status(self):
        return self.outcome.status

    @property
    def scalar(self) -> Optional[ScalarTIF]:
        return self.outcome.scalar

    @property
    def sum(self):
        scalar = self.scalar
        return scalar.sum if scalar is not None else None

    @property
    def hyper_truth(self):
        scalar = self.scalar
        return is_hyper_truth(scalar) if scalar is not None else None

    @property
    def losses(self):
        if isinstance(self.outcome, ValidTensor):
            return self.outcome.tensor.losses
        return ()

    @property
    def binary(self):
        return self.outcome.estimate if isinstance(self.outcome, ValidBinary) else None

    @property
    def free_text(self):
        return self.outcome.text if isinstance(self.outcome, ValidFreeText) else None

    def key(self):
        return (self.model, self.stimulus, self.strategy.value, self.rep)


def build_trial_record(transcript, model_spec, stimulus_spec):
    """
    Parses a raw transcript into a TrialRecord.

    Args:
        transcript (RawTranscript): Archived exchange; transport failures become Garbled outcomes.
        model_spec (ModelSpec): Supplies the provider column.
        stimulus_spec (StimulusSpec): Supplies the phenomenon category.

    Returns:
        TrialRecord: The parsed record.
    """
    strategy = Strategy.parse(transcript.strategy)
    if transcript.status != "ok":
        outcome = Failure(FailureKind.GARBLED, f"transport {transcript.status}: no completion text")
    else:
        outcome = parse_trial(transcript.response_text, strategy)
    return TrialRecord(
        model=transcript.model,
        provider=model_spec.provider,
        stimulus=transcript.stimulus,
        category=stimulus_spec.category,
        strategy=strategy,
        rep=transcript.rep,
        outcome=outcome,
        raw_text=transcript.response_text,
    )


# --- Example Usage ---
if __name__ == "__main__":
    samples = (
        (Strategy.S1_NEUTROSOPHIC, 'Here is my answer: {"T": 0.0, "I": 1.0, "F": 0.0} Hope that helps'),
        (Strategy.S3_ENTROPY_DERIVED, '```json\n{"P_yes": 0.9, "P_no": 0.1}\n```'),
        (Strategy.S4_TENSOR_LOSSES, '{"T": 0.1, "I": 0.9, "losses": [{"what": "unterm'),
    )
    for sample_strategy, sample_text in samples:
        print(sample_strategy.value, parse_trial(sample_text, sample_strategy))
