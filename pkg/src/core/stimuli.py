"""
Registry of test stimuli: the five original phenomena and the three tautology controls.
Statement texts are kept verbatim; ids are stable join keys used by every archive.
"""

from dataclasses import dataclass
from enum import Enum

from src.core.errors import DomainError


class StimulusSet(str, Enum):
    ORIGINAL = "Original"
    TAUTOLOGY = "Tautology"


@dataclass(frozen=True)
class StimulusSpec:
    id: str
    category: str
    statement: str
    set: StimulusSet


_REGISTRY = (
    StimulusSpec("paradox", "Paradox (Logical)", "This sentence is false.", StimulusSet.ORIGINAL),
    StimulusSpec("ignorance", "Ignorance (Epistemic)", "The number of stars in the universe is even.", StimulusSet.ORIGINAL),
    StimulusSpec("vagueness", "Vagueness (Fuzzy)", "John is 1.75 meters tall, therefore John is tall.", StimulusSet.ORIGINAL),
    StimulusSpec("contradiction", "Contradiction (Ethical)", "Lying to save an innocent life is morally right and wrong at the same time.", StimulusSet.ORIGINAL),
    StimulusSpec("contingency", "Contingency (Future)", "It will rain in New York tomorrow.", StimulusSet.ORIGINAL),
    StimulusSpec("taut_math", "Tautology (Mathematical)", "2+2=4", StimulusSet.TAUTOLOGY),
    StimulusSpec("taut_definitional", "Tautology (Definitional)", "All bachelors are unmarried", StimulusSet.TAUTOLOGY),
    StimulusSpec("taut_logical", "Tautology (Logical)", "It is raining or it is not raining", StimulusSet.TAUTOLOGY),
)

_BY_ID = {spec.id: spec for spec in _REGISTRY}

ORIGINAL_IDS = tuple(spec.id for spec in _REGISTRY if spec.set is StimulusSet.ORIGINAL)
TAUTOLOGY_IDS = tuple(spec.id for spec in _REGISTRY if spec.set is StimulusSet.TAUTOLOGY)

# Mean S1 sums reported by the original single-vendor study, per phenomenon.
ORIGINAL_STUDY_SUMS = {
    "paradox": 1.500,
    "ignorance": 1.125,
    "vagueness": 1.125,
    "contradiction": 1.475,
    "contingency": 1.000,
}


def stimulus_registry():
    """Returns all eight stimuli, originals first, in registry order."""
    return list(_REGISTRY)


def get_stimulus(stimulus_id):
    """
    Looks up a stimulus by its id.

    Args:
        stimulus_id (str): e.g. "paradox" or "taut_logical".

    Returns:
        StimulusSpec: The matching spec.
    """
    try:
        return _BY_ID[stimulus_id]
    except KeyError:
        raise DomainError(f"Unknown stimulus id: {stimulus_id!r}") from None


def stimuli_for_set(stimulus_set):
    return [spec for spec in _REGISTRY if spec.set is StimulusSet(stimulus_set)]


def category_of(stimulus_id):
    spec = _BY_ID.get(stimulus_id)
    return spec.category if spec else ""
