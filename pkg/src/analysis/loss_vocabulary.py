"""
Loss-vocabulary analysis for tensor (S4) evaluations.
Tokenizes declared-loss descriptions, compares pooled vocabularies with Jaccard similarity,
and summarizes severities and cross-stimulus description overlap.
"""

import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

from src.analysis.scalar_metrics import fmean, manhattan_distance, mean_triple
from src.core.errors import DomainError, EmptyResultError
from src.core.prompt_templates import Strategy
from src.core.stimuli import ORIGINAL_IDS
from src.utils.logger import logger

# Letters, digits and apostrophes make up tokens; the underscore is a separator too.
_SEPARATORS = re.compile(r"[^\w']+|_")


@lru_cache(maxsize=1)
def english_stopwords():
    """English stopword list from NLTK, fetched quietly on first use."""
    import nltk
    from nltk.corpus import stopwords

    try:
        words = stopwords.words("english")
    except LookupError:
        logger.info("Downloading the NLTK stopword corpus.")
        nltk.download("stopwords", quiet=True)
        words = stopwords.words("english")
    return frozenset(words)


def tokenize_loss_text(text, stopwords=False):
    """
    Splits a loss description into its set of word tokens.

    Args:
        text (str): Free text, e.g. the 'what' field of a loss.
        stopwords (bool): Drop English stopwords (calibration option, off by default).

    Returns:
        frozenset[str]: Lower-cased tokens exactly as split, apostrophes included; no stemming.
    """
    if not text:
        return frozenset()
    tokens = {token for token in _SEPARATORS.split(str(text).lower()) if token.strip("'")}
    if stopwords:
        tokens -= english_stopwords()
    return frozenset(tokens)


def jaccard(a, b):
    """|a & b| / |a | b|; two empty sets count as identical (1.0)."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def tensor_records(records, model=None, stimulus=None):
    """Valid S4 records, optionally filtered by model and stimulus."""
    return [
        r for r in records
        if r.strategy is Strategy.S4_TENSOR_LOSSES and r.is_valid
        and (model is None or r.model == model)
        and (stimulus is None or r.stimulus == stimulus)
    ]


def _phenomenon_order(stimuli):
    known = [s for s in ORIGINAL_IDS if s in stimuli]
    return known + sorted(s for s in stimuli if s not in ORIGINAL_IDS)


def pooled_vocabulary(records, model, stimulus, stopwords=False):
    """Union of 'what' tokens across a model's valid S4 reps for one phenomenon."""
    vocabulary = set()
    for record in tensor_records(records, model=model, stimulus=stimulus):
        for loss in record.losses:
            vocabulary |= tokenize_loss_text(loss.what, stopwords)
    return frozenset(vocabulary)


@dataclass(frozen=True)
class JaccardMatrix:
    model: str
    phenomena: tuple
    values: tuple

    def get(self, a, b):
        return self.values[self.phenomena.index(a)][self.phenomena.index(b)]

    def off_diagonal(self):
        return [(a, b, self.get(a, b)) for a, b in combinations(self.phenomena, 2)]

    def max_off_diagonal(self):
        return max((value for _, _, value in self.off_diagonal()), default=None)


def pairwise_jaccard_matrix(model, records, stopwords=False):
    """
    Jaccard similarity between a model's pooled loss vocabularies for every pair of phenomena.

    Args:
        model (str): Model slug.
        records (iterable[TrialRecord]): Records; only the model's S4 rows are used.
        stopwords (bool): Tokenizer stopword flag.

    Returns:
        JaccardMatrix: Symmetric, unit diagonal; phenomena without valid reps are left out.
    """
    records = list(records)
    attempted = {r.stimulus for r in records if r.model == model and r.strategy is Strategy.S4_TENSOR_LOSSES}
    covered = {r.stimulus for r in tensor_records(records, model=model)}
    for stimulus in sorted(attempted - covered):
        logger.warning(f"{model}: no valid S4 reps for '{stimulus}'; excluded from the Jaccard matrix.")
    phenomena = tuple(_phenomenon_order(covered))
    if not phenomena:
        raise EmptyResultError(f"{model} has no valid S4 records")

    vocabularies = {p: pooled_vocabulary(records, model, p, stopwords) for p in phenomena}
    values = tuple(
        tuple(1.0 if a == b else jaccard(vocabularies[a], vocabularies[b]) for b in phenomena)
        for a in phenomena
    )
    return JaccardMatrix(model, phenomena, values)


def jaccard_matrices(records, stopwords=False):
    """Pairwise matrices for every model with S4 data, keyed by slug."""
    records = list(records)
    models = sorted({r.model for r in tensor_records(records)})
    return {model: pairwise_jaccard_matrix(model, records, stopwords) for model in models}


@dataclass(frozen=True)
class ScalarVsLoss:
    model: str
    stimulus_a: str
    stimulus_b: str
    manhattan: float
    jaccard: float
    reps_a: int
    reps_b: int


def scalar_vs_jaccard(records, stopwords=False, pair=("paradox", "ignorance")):
    """
    Contrasts scalar distance with loss-vocabulary overlap for two phenomena, per model.
    Near-zero distance together with low Jaccard means the scalars collapse what the losses keep apart.

    Returns:
        list[ScalarVsLoss]: One row per model that has valid S4 reps for both phenomena.
    """
    records = list(records)
    a, b = pair
    rows = []
    for model in sorted({r.model for r in tensor_records(records)}):
        reps_a = len(tensor_records(records, model=model, stimulus=a))
        reps_b = len(tensor_records(records, model=model, stimulus=b))
        if not reps_a or not reps_b:
            logger.warning(f"{model}: missing valid S4 reps for {a} or {b}; skipped in scalar-vs-Jaccard.")
            continue
        distance = manhattan_distance(
            mean_triple(records, model, a, Strategy.S4_TENSOR_LOSSES),
            mean_triple(records, model, b, Strategy.S4_TENSOR_LOSSES),
        )
        similarity = jaccard(
            pooled_vocabulary(records, model, a, stopwords),
            pooled_vocabulary(records, model, b, stopwords),
        )
        rows.append(ScalarVsLoss(model, a, b, distance, similarity, reps_a, reps_b))
    return rows


@dataclass(frozen=True)
class SeverityProfile:
    model: str
    stimulus: str
    mean_severity: float
    losses_per_rep: float
    max_severities: tuple
    valid_reps: int
    loss_count: int


def severity_profile(records):
    """
    Severity summary for the valid S4 reps of a single phenomenon.

    Args:
        records (iterable[TrialRecord]): Records of one stimulus (and typically one model).

    Returns:
        SeverityProfile: Mean over all declared losses, losses per rep and per-rep max severity.
    """
    pool = tensor_records(records)
    if not pool:
        raise EmptyResultError("severity profile needs at least one valid S4 record")
    stimuli = {r.stimulus for r in pool}
    if len(stimuli) != 1:
        raise DomainError(f"severity profile expects one phenomenon, got {sorted(stimuli)}")
    models = {r.model for r in pool}
    severities = [loss.severity for r in pool for loss in r.losses]
    return SeverityProfile(
        model=models.pop() if len(models) == 1 else "*",
        stimulus=stimuli.pop(),
        mean_severity=fmean(severities),
        losses_per_rep=len(severities) / len(pool),
        max_severities=tuple(r.outcome.tensor.max_severity for r in pool),
        valid_reps=len(pool),
        loss_count=len(severities),
    )


def severity_table(records):
    """Severity profiles per model and phenomenon, in model then phenomenon order."""
    pool = tensor_records(records)
    profiles = []
    for model in sorted({r.model for r in pool}):
        stimuli = _phenomenon_order({r.stimulus for r in pool if r.model == model})
        for stimulus in stimuli:
            profiles.append(severity_profile(tensor_records(pool, model=model, stimulus=stimulus)))
    return profiles


@dataclass(frozen=True)
class LossOverlap:
    unique_descriptions: int
    total_descriptions: int
    pair_jaccard: tuple


def normalize_description(text):
    return text.strip().casefold()


def cross_stimulus_loss_overlap(records):
    """
    Counts exact (trimmed, case-folded) loss descriptions and compares them across stimuli.

    Returns:
        LossOverlap: unique and total description counts plus (stimulus a, stimulus b, Jaccard)
        for every stimulus pair.
    """
    pool = tensor_records(records)
    descriptions = [(r.stimulus, normalize_description(loss.what)) for r in pool for loss in r.losses]
    if not descriptions:
        raise EmptyResultError("no declared losses to compare")
    by_stimulus = {}
    for stimulus, text in descriptions:
        by_stimulus.setdefault(stimulus, set()).add(text)
    pairs = tuple(
        (a, b, jaccard(by_stimulus[a], by_stimulus[b]))
        for a, b in combinations(_phenomenon_order(set(by_stimulus)), 2)
    )
    return LossOverlap(len({text for _, text in descriptions}), len(descriptions), pairs)
