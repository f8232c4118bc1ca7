"""
Prompt construction for the five evaluation strategies.
Every (strategy, statement) pair renders to the same bytes on every call; the texts are
pinned by golden files under tests/core_tests/golden_prompts.
"""

from dataclasses import dataclass
from enum import Enum

from src.core.errors import DomainError
from src.utils.logger import logger

STATEMENT_PLACEHOLDER = "{statement}"


class Strategy(str, Enum):
    S1_NEUTROSOPHIC = "S1"
    S2_PROBABILISTIC = "S2"
    S3_ENTROPY_DERIVED = "S3"
    S4_TENSOR_LOSSES = "S4"
    S5_ABLATION = "S5"

    @classmethod
    def parse(cls, value):
        """Accepts 'S1', 's1', 'S1_Neutrosophic' or a Strategy instance."""
        if isinstance(value, cls):
            return value
        token = str(value).strip().upper().split("_", 1)[0]
        for member in cls:
            if member.value == token:
                return member
        raise DomainError(f"Unknown strategy: {value!r}")


@dataclass(frozen=True)
class PromptPair:
    system: str
    user: str

    def messages(self):
        """Chat messages for the pair; an empty system prompt is omitted."""
        messages = []
        if self.system:
            messages.append({"role": "system", "content": self.system})
        messages.append({"role": "user", "content": self.user})
        return messages


_TIF_BULLETS = (
    "- Truth (T): To what degree is this statement true? [0.0 to 1.0]",
    "- Indeterminacy (I): To what degree is the truth value unknown, undetermined, or inherently uncertain? [0.0 to 1.0]",
    "- Falsity (F): To what degree is this statement false? [0.0 to 1.0]",
)

_S1_SYSTEM = (
    "You are an expert in Neutrosophic Logic. You evaluate statements using three INDEPENDENT "
    "dimensions: Truth (T), Indeterminacy (I), and Falsity (F), each on [0.0, 1.0]. These dimensions "
    "are NOT constrained to sum to 1.0. A statement can be simultaneously partially true AND partially "
    "false AND partially indeterminate. Respond with ONLY a JSON object, no other text."
)
_S1_USER = "\n".join((
    "Evaluate this statement on three independent dimensions:",
    "",
    'Statement: "{statement}"',
    "",
    *_TIF_BULLETS,
    "",
    "T, I, and F are independent. They need NOT sum to 1.0.",
    "",
    'Respond with ONLY: {"T": , "I": , "F": }',
))

_S2_SYSTEM = (
    "You are a probabilistic classifier. You assign probabilities to three mutually exclusive "
    "categories that MUST sum to exactly 1.0. Respond with ONLY a JSON object, no other text."
)
_S2_USER = "\n".join((
    "Classify this statement into three mutually exclusive categories whose probabilities sum to 1.0:",
    "",
    'Statement: "{statement}"',
    "",
    "- T (True): Probability the statement is true",
    "- I (Uncertain): Probability the truth value is unknown or undetermined",
    "- F (False): Probability the statement is false",
    "",
    "CONSTRAINT: T + I + F must equal 1.0",
    "",
    'Respond with ONLY: {"T": , "I": , "F": }',
))

_S3_SYSTEM = (
    "You are a binary truth estimator. You estimate the probability that a statement is true (YES) "
    "versus false (NO). The two probabilities must sum to 1.0. Respond with ONLY a JSON object, no "
    "other text."
)
_S3_USER = "\n".join((
    "Estimate the probability that this statement is true versus false:",
    "",
    'Statement: "{statement}"',
    "",
    "- P_yes: Probability the statement is true [0.0 to 1.0]",
    "- P_no: Probability the statement is false [0.0 to 1.0]",
    "",
    "CONSTRAINT: P_yes + P_no must equal 1.0",
    "",
    'Respond with ONLY: {"P_yes": , "P_no": }',
))

_S4_SYSTEM = (
    "You are an expert in Neutrosophic Logic and epistemic honesty. You evaluate statements using "
    "three INDEPENDENT dimensions: Truth (T), Indeterminacy (I), and Falsity (F), each on [0.0, 1.0]. "
    "These dimensions are NOT constrained to sum to 1.0. Crucially, you must also declare your LOSSES: "
    "what you cannot evaluate, what limits your assessment, and why your indeterminacy value is what it "
    "is. Respond with ONLY a JSON object, no other text."
)
_S4_USER = "\n".join((
    "Evaluate this statement on three independent dimensions, and declare what you cannot evaluate:",
    "",
    'Statement: "{statement}"',
    "",
    *_TIF_BULLETS,
    "- losses: A list of objects, each with:",
    '  - "what": What you cannot evaluate (brief description)',
    '  - "why": Why this limits your assessment',
    '  - "severity": How much this affects your evaluation [0.0 to 1.0]',
    "",
    "T, I, and F are independent. They need NOT sum to 1.0. You MUST declare at least one loss. "
    "Honesty about limits is required.",
    "",
    'Respond with ONLY: {"T": , "I": , "F": , "losses": [{"what": "", "why": "", "severity": }, ...]}',
))

S5_INSTRUCTION = (
    "Identify any limitations, uncertainties, or difficulties in determining whether this statement "
    "is true or false."
)
_S5_USER = "\n".join((
    S5_INSTRUCTION,
    "",
    'Statement: "{statement}"',
))


class PromptTemplates:
    """Renders the system/user prompt pair for each strategy."""

    def __init__(self):
        self._templates = {
            Strategy.S1_NEUTROSOPHIC: self._neutrosophic_prompt,
            Strategy.S2_PROBABILISTIC: self._probabilistic_prompt,
            Strategy.S3_ENTROPY_DERIVED: self._entropy_derived_prompt,
            Strategy.S4_TENSOR_LOSSES: self._tensor_losses_prompt,
            Strategy.S5_ABLATION: self._ablation_prompt,
        }

    def build_prompt(self, strategy, statement):
        """
        Builds the prompt pair for one strategy and statement.

        Args:
            strategy (Strategy | str): One of S1..S5.
            statement (str): Stimulus text; inserted verbatim inside double quotes.

        Returns:
            PromptPair: System and user messages.
        """
        if not isinstance(statement, str) or not statement:
            raise DomainError("statement must be non-empty text")
        strategy = Strategy.parse(strategy)
        logger.debug(f"Building {strategy.value} prompt for statement: {statement[:40]}")
        return self._templates[strategy](statement)

    @staticmethod
    def _fill(template, statement):
        # str.format would trip over the literal JSON braces in the templates
        return template.replace(STATEMENT_PLACEHOLDER, statement)

    def _neutrosophic_prompt(self, statement):
        return PromptPair(_S1_SYSTEM, self._fill(_S1_USER, statement))

    def _probabilistic_prompt(self, statement):
        return PromptPair(_S2_SYSTEM, self._fill(_S2_USER, statement))

    def _entropy_derived_prompt(self, statement):
        return PromptPair(_S3_SYSTEM, self._fill(_S3_USER, statement))

    def _tensor_losses_prompt(self, statement):
        return PromptPair(_S4_SYSTEM, self._fill(_S4_USER, statement))

    def _ablation_prompt(self, statement):
        return PromptPair("", self._fill(_S5_USER, statement))


_DEFAULT_TEMPLATES = PromptTemplates()


def build_prompt(strategy, statement):
    """Module-level shortcut for PromptTemplates().build_prompt."""
    return _DEFAULT_TEMPLATES.build_prompt(strategy, statement)


def render_golden(pair):
    """Serializes a prompt pair into the golden-file layout."""
    return f"[system]\n{pair.system}\n[user]\n{pair.user}\n"
