"""
Theme tagging of declared losses and free-text responses against a versioned keyword lexicon,
cross-model theme convergence (with its permutation test) and ablation theme overlap.
All theme results are relative to the lexicon that produced them.
"""

from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import yaml

from src.analysis.loss_vocabulary import jaccard, tensor_records
from src.analysis.scalar_metrics import fmean
from src.analysis.statistics import permutation_test
from src.core.errors import DomainError, EmptyResultError, SchemaError
from src.core.neutrosophic import LossDeclaration
from src.core.prompt_templates import Strategy
from src.utils.logger import logger


@dataclass(frozen=True)
class ThemeLexicon:
    version: str
    themes: dict
    reference_themes: tuple = ()

    def __post_init__(self):
        if not self.themes:
            raise DomainError("theme lexicon is empty")
        normalized = {}
        for theme_id, patterns in self.themes.items():
            patterns = tuple(str(p).strip().lower() for p in patterns)
            if not patterns or any(not p for p in patterns):
                raise DomainError(f"theme '{theme_id}' needs non-empty patterns")
            normalized[str(theme_id)] = patterns
        object.__setattr__(self, "themes", normalized)
        object.__setattr__(self, "reference_themes", tuple(self.reference_themes))
        unknown = [t for t in self.reference_themes if t not in normalized]
        if unknown:
            raise DomainError(f"reference themes missing from the lexicon: {unknown}")

    @property
    def theme_ids(self):
        return tuple(self.themes)

    def extra_themes(self):
        return tuple(t for t in self.themes if t not in self.reference_themes)


def load_lexicon(path):
    """
    Loads a lexicon document.

    Args:
        path (str | Path): YAML with 'version', 'reference_themes' and a 'themes' list of
            {id, patterns} entries.

    Returns:
        ThemeLexicon: The validated lexicon.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.error(f"Cannot load theme lexicon {path}: {e}")
        raise SchemaError(f"cannot load theme lexicon: {e}", path=path) from e
    if not isinstance(document, dict) or not isinstance(document.get("themes"), list):
        raise SchemaError("lexicon must be a mapping with a 'themes' list", column="themes", path=path)

    themes = {}
    for index, entry in enumerate(document["themes"], start=1):
        if not isinstance(entry, dict) or "id" not in entry or "patterns" not in entry:
            raise SchemaError("theme entries need 'id' and 'patterns'", line=index, path=path)
        if entry["id"] in themes:
            raise DomainError(f"duplicate theme id '{entry['id']}' in {path}")
        themes[entry["id"]] = entry["patterns"] or []
    lexicon = ThemeLexicon(str(document.get("version", "")), themes, tuple(document.get("reference_themes") or ()))
    logger.info(f"Loaded theme lexicon v{lexicon.version} with {len(lexicon.themes)} themes from {path}.")
    return lexicon


def _text_of(item):
    if isinstance(item, LossDeclaration):
        return f"{item.what} {item.why}"
    return "" if item is None else str(item)


def tag_themes(items, lexicon):
    """
    Themes whose patterns occur (case-insensitive substring) in the given texts.

    Args:
        items (str | LossDeclaration | iterable of either): A loss is matched on its what + why text.
        lexicon (ThemeLexicon): Patterns per theme.

    Returns:
        frozenset[str]: Present theme ids.
    """
    if lexicon is None or not lexicon.themes:
        raise DomainError("theme tagging needs a non-empty lexicon")
    if isinstance(items, (str, LossDeclaration)) or items is None:
        items = [items]
    found = set()
    for item in items:
        text = _text_of(item).lower()
        if not text:
            continue
        for theme_id, patterns in lexicon.themes.items():
            if theme_id not in found and any(pattern in text for pattern in patterns):
                found.add(theme_id)
    return frozenset(found)


def _mean_pairwise(sets):
    pairs = list(combinations(sets, 2))
    if not pairs:
        raise DomainError("pairwise Jaccard needs at least two models")
    return fmean(jaccard(a, b) for a, b in pairs)


def _rep_theme_sets(records, lexicon):
    """model -> stimulus -> list of per-rep theme sets, from valid S4 records."""
    table = defaultdict(lambda: defaultdict(list))
    for record in sorted(tensor_records(records), key=lambda r: r.key()):
        table[record.model][record.stimulus].append(tag_themes(record.losses, lexicon))
    return table


def _pool(rep_sets, mode):
    if not rep_sets:
        return frozenset()
    if mode == "every":
        return frozenset.intersection(*rep_sets)
    return frozenset().union(*rep_sets)


@dataclass(frozen=True)
class StimulusConvergence:
    stimulus: str
    mean_jaccard: float
    universal: tuple
    models: int


@dataclass(frozen=True)
class ConvergenceSummary:
    universal_themes: tuple
    mean_pairwise_jaccard: float
    per_stimulus: tuple
    models: tuple
    mode: str
    unit: str

    @property
    def universal_count(self):
        return len(self.universal_themes)


def theme_convergence(records, lexicon, mode="any", unit="per-stimulus"):
    """
    Cross-model agreement on loss themes.

    Args:
        records (iterable[TrialRecord]): Records; valid S4 rows are used.
        lexicon (ThemeLexicon): Theme patterns.
        mode (str): 'any' counts a theme for a model when it appears in any rep; 'every' needs every rep
            of a stimulus.
        unit (str): 'per-stimulus' averages the per-stimulus mean pairwise Jaccard over stimuli;
            'pooled' compares each model's themes pooled over all stimuli.

    Returns:
        ConvergenceSummary: Universal themes, mean pairwise Jaccard and the per-stimulus breakdown.
    """
    if mode not in ("any", "every"):
        raise DomainError(f"universal mode must be 'any' or 'every', got {mode!r}")
    if unit not in ("per-stimulus", "pooled"):
        raise DomainError(f"convergence unit must be 'per-stimulus' or 'pooled', got {unit!r}")
    table = _rep_theme_sets(records, lexicon)
    models = tuple(sorted(table))
    if len(models) < 2:
        raise DomainError(f"theme convergence needs at least two models, got {len(models)}")

    pooled_sets = {
        model: frozenset().union(*(_pool(reps, mode) for reps in table[model].values()))
        for model in models
    }
    universal = tuple(sorted(frozenset.intersection(*pooled_sets.values())))

    breakdown = []
    for stimulus in sorted({s for model in models for s in table[model]}):
        sets = [_pool(table[model][stimulus], mode) for model in models if table[model].get(stimulus)]
        if len(sets) < 2:
            logger.warning(f"Stimulus '{stimulus}' has S4 data from fewer than two models; left out of convergence.")
            continue
        breakdown.append(
            StimulusConvergence(stimulus, _mean_pairwise(sets), tuple(sorted(frozenset.intersection(*sets))), len(sets))
        )

    if unit == "pooled":
        mean_jaccard = _mean_pairwise(list(pooled_sets.values()))
    else:
        if not breakdown:
            raise EmptyResultError("no stimulus has S4 data from two or more models")
        mean_jaccard = fmean(item.mean_jaccard for item in breakdown)
    return ConvergenceSummary(universal, mean_jaccard, tuple(breakdown), models, mode, unit)


@dataclass(frozen=True)
class PermutationSummary:
    observed: float
    p_value: float
    permutations: int
    seed: int


class _LossAssignment:
    """Per-model loss theme masks and their stimulus labels, for fast relabelling."""

    def __init__(self, records, lexicon):
        bits = {theme_id: 1 << k for k, theme_id in enumerate(lexicon.themes)}
        self.masks = {}
        self.labels = {}
        for record in sorted(tensor_records(records), key=lambda r: r.key()):
            for loss in record.losses:
                mask = 0
                for theme_id in tag_themes(loss, lexicon):
                    mask |= bits[theme_id]
                self.masks.setdefault(record.model, []).append(mask)
                self.labels.setdefault(record.model, []).append(record.stimulus)
        self.models = tuple(sorted(self.masks))
        self.stimuli = tuple(sorted({s for labels in self.labels.values() for s in labels}))

    @staticmethod
    def _jaccard(a, b):
        union = a | b
        if not union:
            return 1.0
        return bin(a & b).count("1") / bin(union).count("1")

    def statistic(self, labels_by_model):
        """Mean over stimuli of the mean pairwise Jaccard between model theme sets."""
        per_model = {}
        for model in self.models:
            merged = {}
            for mask, stimulus in zip(self.masks[model], labels_by_model[model]):
                merged[stimulus] = merged.get(stimulus, 0) | mask
            per_model[model] = merged
        stimulus_means = []
        for stimulus in self.stimuli:
            sets = [per_model[m][stimulus] for m in self.models if stimulus in per_model[m]]
            if len(sets) < 2:
                continue
            stimulus_means.append(fmean(self._jaccard(a, b) for a, b in combinations(sets, 2)))
        if not stimulus_means:
            raise EmptyResultError("no stimulus has S4 losses from two or more models")
        return fmean(stimulus_means)

    def shuffled(self, rng):
        return {model: [self.labels[model][k] for k in rng.permutation(len(self.labels[model]))]
                for model in self.models}


def convergence_permutation_test(records, lexicon, permutations=10000, seed=20250214):
    """
    Tests whether cross-model theme convergence beats chance by shuffling, within each model,
    which stimulus every declared loss belongs to.

    Args:
        records (iterable[TrialRecord]): Records; valid S4 rows are used.
        lexicon (ThemeLexicon): Theme patterns.
        permutations (int): Number of shuffles.
        seed (int): Base seed for the per-shuffle substreams.

    Returns:
        PermutationSummary: Observed statistic and its p-value.
    """
    assignment = _LossAssignment(records, lexicon)
    if len(assignment.models) < 2:
        raise DomainError("convergence permutation test needs at least two models")
    observed = assignment.statistic(assignment.labels)
    p_value = permutation_test(
        observed, lambda rng: assignment.statistic(assignment.shuffled(rng)), permutations, seed
    )
    logger.info(f"Convergence permutation test: observed={observed:.4f}, p={p_value:.6g} ({permutations} shuffles).")
    return PermutationSummary(observed, p_value, permutations, seed)


@dataclass(frozen=True)
class AblationOverlap:
    models: tuple
    reference_themes: tuple
    presence: dict
    overlap: dict
    extras: tuple
    responses: int

    def render_presence(self, model, theme):
        hits, reps = self.presence[model][theme]
        return f"{hits}/{reps}"


def ablation_overlap(records, lexicon, reference_themes=None):
    """
    How much of the reference theme set surfaces when models are asked about limitations without
    any tensor framing.

    Args:
        records (iterable[TrialRecord]): Records; valid S5 rows are used.
        lexicon (ThemeLexicon): Theme patterns.
        reference_themes (iterable[str], optional): Defaults to the lexicon's reference themes.

    Returns:
        AblationOverlap: Per-model presence per rep index ((hits, reps), pooled over stimuli),
        overlap fraction per model, and (theme, response fraction, response count) for extra themes.
    """
    reference = tuple(reference_themes) if reference_themes is not None else lexicon.reference_themes
    if not reference:
        raise DomainError("ablation overlap needs at least one reference theme")
    pool = sorted(
        (r for r in records if r.strategy is Strategy.S5_ABLATION and r.is_valid),
        key=lambda r: r.key(),
    )
    if not pool:
        raise EmptyResultError("no valid S5 responses to analyse")

    response_themes = [(r, tag_themes(r.free_text, lexicon)) for r in pool]
    by_model_rep = defaultdict(lambda: defaultdict(set))
    for record, themes in response_themes:
        by_model_rep[record.model][record.rep] |= themes

    models = tuple(sorted(by_model_rep))
    presence = {}
    overlap = {}
    for model in models:
        reps = by_model_rep[model]
        presence[model] = {
            theme: (sum(1 for found in reps.values() if theme in found), len(reps))
            for theme in lexicon.theme_ids
        }
        found_any = frozenset().union(*reps.values())
        overlap[model] = sum(1 for theme in reference if theme in found_any) / len(reference)

    counts = defaultdict(int)
    for _, themes in response_themes:
        for theme in themes:
            if theme not in reference:
                counts[theme] += 1
    extras = tuple(
        (theme, counts[theme] / len(pool), counts[theme])
        for theme in sorted(counts, key=lambda t: (-counts[t], t))
    )
    return AblationOverlap(models, reference, presence, overlap, extras, len(pool))
