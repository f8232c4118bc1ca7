"""
Configuration management for neutrosophic-eval.
Loads the run grid, transport parameters and analysis settings from one YAML document,
and reads the endpoint API key from the environment variable the document names.
"""

import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import yaml

from src.core.errors import ConfigError, DomainError, StartupError
from src.core.model_manager import DEFAULT_MODELS, ModelManager
from src.core.prompt_templates import Strategy
from src.core.stimuli import ORIGINAL_IDS, get_stimulus
from src.utils.logger import logger

PROJECT_ROOT = Path(__file__).resolve().parents[2]
DEFAULT_LEXICON_PATH = PROJECT_ROOT / "config" / "theme_lexicon.yaml"
DEFAULT_STRATEGIES = (Strategy.S1_NEUTROSOPHIC, Strategy.S2_PROBABILISTIC, Strategy.S3_ENTROPY_DERIVED)


@dataclass(frozen=True)
class RunConfig:
    base_url: str = "https://openrouter.ai/api/v1"
    api_key_env: str = "OPENROUTER_API_KEY"
    models: tuple = DEFAULT_MODELS
    stimuli: tuple = ORIGINAL_IDS
    strategies: tuple = DEFAULT_STRATEGIES
    repetitions: int = 5
    temperature: float = 0.7
    max_tokens: int = 500
    parallelism: int = 4
    retry_limit: int = 3
    retry_base_delay: float = 1.0
    request_timeout: float = 60.0
    top_p: Optional[float] = None
    run_label: str = "run"

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        object.__setattr__(self, "strategies", tuple(Strategy.parse(s) for s in self.strategies))
        _require_int("repetitions", self.repetitions, minimum=1)
        _require_int("parallelism", self.parallelism, minimum=1)
        _require_int("max_tokens", self.max_tokens, minimum=1)
        _require_int("retry_limit", self.retry_limit, minimum=0)
        _require_number("temperature", self.temperature, minimum=0.0)
        _require_number("retry_base_delay", self.retry_base_delay, minimum=0.0)
        _require_number("request_timeout", self.request_timeout, minimum=0.0, strict=True)
        if self.top_p is not None:
            _require_number("top_p", self.top_p, minimum=0.0)
        if not self.base_url:
            raise ConfigError("base_url must be set")
        if not self.api_key_env:
            raise ConfigError("api_key_env must name an environment variable")
        if not self.models:
            raise ConfigError("models must list at least one model")
        if not self.stimuli or not self.strategies:
            raise ConfigError("stimuli and strategies must be non-empty")
        for stimulus_id in self.stimuli:
            try:
                get_stimulus(stimulus_id)
            except DomainError as e:
                raise ConfigError(f"stimuli: {e}") from None

    def grid_size(self):
        return len(self.models) * len(self.stimuli) * len(self.strategies) * self.repetitions

    def max_tokens_for(self, model):
        return model.max_tokens_override if model.max_tokens_override is not None else self.max_tokens

    def to_snapshot(self):
        """Serializable view of the config for archive provenance (never contains the key itself)."""
        return {
            "base_url": self.base_url,
            "api_key_env": self.api_key_env,
            "models": [model.to_dict() for model in self.models],
            "stimuli": list(self.stimuli),
            "strategies": [strategy.value for strategy in self.strategies],
            "repetitions": self.repetitions,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "parallelism": self.parallelism,
            "retry_limit": self.retry_limit,
            "retry_base_delay": self.retry_base_delay,
            "request_timeout": self.request_timeout,
            "top_p": self.top_p,
            "run_label": self.run_label,
        }


@dataclass(frozen=True)
class AnalysisSettings:
    lexicon_path: Path = DEFAULT_LEXICON_PATH
    seed: int = 20250214
    permutations: int = 10000
    stopwords: bool = False
    position_tolerance: float = 0.05
    universal_mode: str = "any"
    convergence_unit: str = "per-stimulus"
    focus_model: str = "mistralai/mistral-medium-3.1"
    column_map_path: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, "lexicon_path", Path(self.lexicon_path))
        if self.column_map_path is not None:
            object.__setattr__(self, "column_map_path", Path(self.column_map_path))
        _require_int("seed", self.seed, minimum=0)
        _require_int("permutations", self.permutations, minimum=1)
        _require_number("position_tolerance", self.position_tolerance, minimum=0.0)
        if self.position_tolerance >= 0.25:
            raise ConfigError("position_tolerance must lie in [0, 0.25)")
        if self.universal_mode not in ("any", "every"):
            raise ConfigError("universal_mode must be 'any' or 'every'")
        if self.convergence_unit not in ("per-stimulus", "pooled"):
            raise ConfigError("convergence_unit must be 'per-stimulus' or 'pooled'")

    def with_overrides(self, **overrides):
        """Returns a copy with the non-None overrides applied (CLI flags)."""
        values = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **values) if values else self


def _require_int(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


def _require_number(name, value, minimum, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if value < minimum or (strict and value == minimum):
        raise ConfigError(f"{name} must be {'>' if strict else '>='} {minimum}, got {value!r}")


class AppConfig:
    _RUN_KEYS = set(RunConfig.__dataclass_fields__)
    _ANALYSIS_KEYS = set(AnalysisSettings.__dataclass_fields__)

    def __init__(self, config_path=None, model_manager=None):
        """
        Loads configuration from a YAML document, or defaults when no path is given.

        Args:
            config_path (str | Path, optional): Document with optional 'run' and 'analysis' sections.
            model_manager (ModelManager, optional): Registry used to resolve model entries.
        """
        self.config_path = Path(config_path) if config_path else None
        self.model_manager = model_manager or ModelManager()
        self._load_config()

    def _read_document(self):
        if self.config_path is None:
            return {}
        try:
            with open(self.config_path, "r", encoding="utf-8") as handle:
                document = yaml.safe_load(handle) or {}
        except OSError as e:
            logger.error(f"Cannot read config file {self.config_path}: {e}")
            raise ConfigError(f"cannot read config file {self.config_path}: {e}") from e
        except yaml.YAMLError as e:
            logger.error(f"Config file {self.config_path} is not valid YAML: {e}")
            raise ConfigError(f"config file {self.config_path} is not valid YAML: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError("config document must be a mapping with 'run' and/or 'analysis' sections")
        return document

    def _load_config(self):
        document = self._read_document()
        run_section = document.get("run") or {}
        analysis_section = document.get("analysis") or {}
        self._check_keys("run", run_section, self._RUN_KEYS)
        self._check_keys("analysis", analysis_section, self._ANALYSIS_KEYS)

        run_values = dict(run_section)
        if "models" in run_values:
            run_values["models"] = tuple(self.model_manager.from_config(entry) for entry in run_values["models"] or [])
        if "strategies" in run_values:
            try:
                run_values["strategies"] = tuple(Strategy.parse(s) for s in run_values["strategies"] or [])
            except DomainError as e:
                raise ConfigError(f"strategies: {e}") from None

        analysis_values = dict(analysis_section)
        for key in ("lexicon_path", "column_map_path"):
            if analysis_values.get(key):
                analysis_values[key] = self._resolve_path(analysis_values[key])

        self.run = RunConfig(**run_values)
        self.analysis = AnalysisSettings(**analysis_values)
        logger.info(
            f"Configuration loaded: {len(self.run.models)} models, {len(self.run.stimuli)} stimuli, "
            f"{len(self.run.strategies)} strategies, {self.run.repetitions} reps."
        )

    @staticmethod
    def _check_keys(section, values, allowed):
        if not isinstance(values, dict):
            raise ConfigError(f"'{section}' section must be a mapping")
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise ConfigError(f"unknown key(s) in '{section}' section: {', '.join(unknown)}")

    def _resolve_path(self, value):
        path = Path(value)
        if path.is_absolute():
            return path
        base = self.config_path.parent if self.config_path else Path.cwd()
        candidate = base / path
        return candidate if candidate.exists() else PROJECT_ROOT / path

    def get_api_key(self):
        """Returns the endpoint API key or raises StartupError when the variable is unset."""
        return read_api_key(self.run.api_key_env)


def _get_secret(secret_name):
    """
    Retrieves a secret from the environment.

    Args:
        secret_name (str): Name of the environment variable.

    Returns:
        str | None: Secret value, or None when unset or empty.
    """
    value = os.environ.get(secret_name)
    if not value:
        logger.warning(f"Environment variable '{secret_name}' is not set.")
        return None
    return value


def read_api_key(env_name):
    key = _get_secret(env_name)
    if not key:
        raise StartupError(f"API key environment variable '{env_name}' is not set")
    return key
