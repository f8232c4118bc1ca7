"""
Model registry for evaluation runs.
Knows the five studied chat models by slug, display name and provider, and resolves the
model entries of a run configuration into ModelSpec values.
"""

from dataclasses import dataclass
from typing import Optional

from src.core.errors import ConfigError
from src.utils.logger import logger


@dataclass(frozen=True)
class ModelSpec:
    slug: str
    display_name: str = ""
    provider: str = ""
    max_tokens_override: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.slug, str) or not self.slug.strip():
            raise ConfigError("model slug must be non-empty")
        if self.max_tokens_override is not None:
            if isinstance(self.max_tokens_override, bool) or not isinstance(self.max_tokens_override, int) \
                    or self.max_tokens_override < 1:
                raise ConfigError(f"max_tokens_override for {self.slug} must be a positive integer")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.slug)

    def to_dict(self):
        return {
            "slug": self.slug,
            "display_name": self.display_name,
            "provider": self.provider,
            "max_tokens_override": self.max_tokens_override,
        }


DEFAULT_MODELS = (
    ModelSpec("anthropic/claude-sonnet-4.6", "Claude Sonnet 4.6", "Anthropic"),
    ModelSpec("meta-llama/llama-4-maverick", "Llama 4 Maverick", "Meta"),
    ModelSpec("deepseek/deepseek-chat-v3-0324", "DeepSeek V3", "DeepSeek"),
    ModelSpec("qwen/qwen3-235b-a22b", "Qwen3-235B", "Alibaba"),
    ModelSpec("mistralai/mistral-medium-3.1", "Mistral Medium 3.1", "Mistral"),
)


class ModelManager:
    def __init__(self, models=DEFAULT_MODELS):
        """
        Initializes the ModelManager with a set of known models.

        Args:
            models (iterable[ModelSpec]): Models that can be referenced by slug or display name.
        """
        self._by_key = {}
        for model in models:
            self.register(model)
        logger.debug(f"ModelManager initialized with {len(self._by_key) // 2} known models.")

    def register(self, model):
        self._by_key[model.slug.lower()] = model
        self._by_key[model.display_name.lower()] = model

    def known_models(self):
        return sorted({model.slug: model for model in self._by_key.values()}.values(), key=lambda m: m.slug)

    def resolve(self, key):
        """
        Returns the ModelSpec registered under a slug or display name.
        Unknown slugs resolve to a bare spec so that any endpoint model can be evaluated.

        Args:
            key (str): Model slug ("mistralai/mistral-medium-3.1") or display name ("Mistral Medium 3.1").

        Returns:
            ModelSpec: The registered spec, or a new one carrying only the slug.
        """
        model = self._by_key.get(str(key).strip().lower())
        if model is None:
            logger.debug(f"Model '{key}' is not in the registry; using it as a bare slug.")
            return ModelSpec(str(key).strip())
        return model

    def from_config(self, entry):
        """
        Builds a ModelSpec from a config entry (a slug string or a mapping).

        Args:
            entry (str | dict): e.g. "qwen/qwen3-235b-a22b" or {"slug": ..., "max_tokens_override": 1500}.

        Returns:
            ModelSpec: The resolved spec with any per-model override applied.
        """
        if isinstance(entry, str):
            return self.resolve(entry)
        if not isinstance(entry, dict) or "slug" not in entry:
            raise ConfigError(f"model entries must be slugs or mappings with a 'slug' key, got {entry!r}")
        known = self.resolve(entry["slug"])
        return ModelSpec(
            slug=known.slug,
            display_name=entry.get("display_name") or known.display_name,
            provider=entry.get("provider") or known.provider,
            max_tokens_override=entry.get("max_tokens_override", known.max_tokens_override),
        )

    def display_name(self, slug):
        return self.resolve(slug).display_name

    def provider(self, slug):
        return self.resolve(slug).provider
