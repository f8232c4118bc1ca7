import unittest
from pathlib import Path

from src.analysis.themes import (
    ThemeLexicon,
    ablation_overlap,
    convergence_permutation_test,
    load_lexicon,
    tag_themes,
    theme_convergence,
)
from src.core.errors import DomainError, EmptyResultError, SchemaError
from src.core.neutrosophic import LossDeclaration
from src.utils.config import DEFAULT_LEXICON_PATH
from tests.test_utils import MODEL_A, MODEL_B, free_text_record, generate_temp_dir, tensor_record

MODEL_C = "deepseek/deepseek-chat-v3-0324"


def small_lexicon():
    return ThemeLexicon(
        version="test",
        themes={
            "self-reference": ["self-referen", "loop"],
            "empirical-access": ["observ", "count"],
            "temporal-uncertainty": ["future", "tomorrow"],
            "language-ambiguity": ["ambigu", "wording"],
        },
        reference_themes=("self-reference", "empirical-access", "temporal-uncertainty"),
    )


class TestLexicon(unittest.TestCase):

    def test_shipped_lexicon(self):
        lexicon = load_lexicon(DEFAULT_LEXICON_PATH)
        self.assertEqual(len(lexicon.reference_themes), 10)
        self.assertEqual(len(lexicon.themes), 16)
        self.assertIn("language-ambiguity", lexicon.extra_themes())
        self.assertIn("pragmatic-truth", lexicon.extra_themes())

    def test_patterns_are_lowercased(self):
        lexicon = ThemeLexicon("1", {"x": ["LOOP "]})
        self.assertEqual(lexicon.themes["x"], ("loop",))

    def test_invalid_lexicons(self):
        with self.assertRaises(DomainError):
            ThemeLexicon("1", {})
        with self.assertRaises(DomainError):
            ThemeLexicon("1", {"x": [""]})
        with self.assertRaises(DomainError):
            ThemeLexicon("1", {"x": ["a"]}, reference_themes=("y",))

    def test_duplicate_ids_and_bad_documents(self):
        with generate_temp_dir() as root:
            path = Path(root) / "lexicon.yaml"
            path.write_text("version: 1\nthemes:\n  - {id: a, patterns: [x]}\n  - {id: a, patterns: [y]}\n",
                            encoding="utf-8")
            with self.assertRaises(DomainError):
                load_lexicon(path)
            path.write_text("themes: {a: [x]}\n", encoding="utf-8")
            with self.assertRaises(SchemaError):
                load_lexicon(path)
            with self.assertRaises(SchemaError):
                load_lexicon(Path(root) / "missing.yaml")


class TestTagThemes(unittest.TestCase):

    def setUp(self):
        self.lexicon = small_lexicon()

    def test_loss_matches_on_what_and_why(self):
        loss = LossDeclaration("Truth value", "The sentence creates a LOOP", 0.9)
        self.assertEqual(tag_themes(loss, self.lexicon), frozenset({"self-reference"}))

    def test_free_text_and_lists(self):
        text = "The ambiguity of the word 'tall' and what we can observe tomorrow."
        self.assertEqual(
            tag_themes(text, self.lexicon),
            frozenset({"language-ambiguity", "empirical-access", "temporal-uncertainty"}),
        )
        self.assertEqual(tag_themes([], self.lexicon), frozenset())
        self.assertEqual(tag_themes(None, self.lexicon), frozenset())

    def test_shipped_lexicon_tags_ambiguity(self):
        lexicon = load_lexicon(DEFAULT_LEXICON_PATH)
        self.assertIn("language-ambiguity", tag_themes("the ambiguity of the word 'tall'", lexicon))


class TestConvergence(unittest.TestCase):

    def setUp(self):
        self.lexicon = small_lexicon()
        self.records = []
        for model in (MODEL_A, MODEL_B, MODEL_C):
            self.records.append(tensor_record(model, "paradox", 0.0, 1.0, 0.0,
                                              [("self-reference", "loop", 0.9)], rep=1))
            self.records.append(tensor_record(model, "contingency", 0.2, 0.8, 0.2,
                                              [("the future", "unknown tomorrow", 0.8)], rep=1))
        self.records.append(tensor_record(MODEL_C, "contingency", 0.2, 0.8, 0.2,
                                          [("observed data", "cannot count", 0.5)], rep=2))

    def test_identical_theme_sets_converge_fully(self):
        records = [r for r in self.records if not (r.model == MODEL_C and r.rep == 2)]
        summary = theme_convergence(records, self.lexicon)
        self.assertEqual(summary.mean_pairwise_jaccard, 1.0)
        self.assertEqual(summary.universal_themes, ("self-reference", "temporal-uncertainty"))
        self.assertEqual(summary.universal_count, 2)

    def test_any_versus_every_mode(self):
        any_mode = theme_convergence(self.records, self.lexicon, mode="any")
        every_mode = theme_convergence(self.records, self.lexicon, mode="every")
        contingency_any = next(s for s in any_mode.per_stimulus if s.stimulus == "contingency")
        contingency_every = next(s for s in every_mode.per_stimulus if s.stimulus == "contingency")
        # under 'any' C adds empirical-access; under 'every' C keeps nothing for contingency
        self.assertAlmostEqual(contingency_any.mean_jaccard, (1.0 + 0.5 + 0.5) / 3)
        self.assertAlmostEqual(contingency_every.mean_jaccard, (1.0 + 0.0 + 0.0) / 3)
        self.assertEqual(every_mode.universal_themes, ("self-reference",))

    def test_pooled_unit(self):
        summary = theme_convergence(self.records, self.lexicon, unit="pooled")
        # pooled sets: A = B = {self, temporal}; C = {self, temporal, empirical}
        self.assertAlmostEqual(summary.mean_pairwise_jaccard, (1.0 + 2 / 3 + 2 / 3) / 3)

    def test_needs_two_models(self):
        records = [r for r in self.records if r.model == MODEL_A]
        with self.assertRaises(DomainError):
            theme_convergence(records, self.lexicon)
        with self.assertRaises(DomainError):
            theme_convergence(self.records, self.lexicon, mode="most")

    def test_permutation_test_is_reproducible(self):
        first = convergence_permutation_test(self.records, self.lexicon, permutations=200, seed=5)
        second = convergence_permutation_test(self.records, self.lexicon, permutations=200, seed=5)
        self.assertEqual(first, second)
        self.assertTrue(0.0 < first.p_value <= 1.0)
        expected = theme_convergence(self.records, self.lexicon).mean_pairwise_jaccard
        self.assertAlmostEqual(first.observed, expected)


class TestAblationOverlap(unittest.TestCase):

    def setUp(self):
        self.lexicon = small_lexicon()

    def test_presence_overlap_and_extras(self):
        records = [
            free_text_record(MODEL_A, "paradox", "A self-referential loop.", rep=1),
            free_text_record(MODEL_A, "contingency", "We cannot observe the future.", rep=1),
            free_text_record(MODEL_A, "paradox", "The wording is ambiguous.", rep=2),
            free_text_record(MODEL_B, "paradox", "Nothing specific.", rep=1),
        ]
        result = ablation_overlap(records, self.lexicon)
        self.assertEqual(result.overlap[MODEL_A], 1.0)
        self.assertEqual(result.overlap[MODEL_B], 0.0)
        self.assertEqual(result.render_presence(MODEL_A, "self-reference"), "1/2")
        self.assertEqual(result.render_presence(MODEL_A, "language-ambiguity"), "1/2")
        self.assertEqual(result.extras, (("language-ambiguity", 0.25, 1),))
        self.assertEqual(result.responses, 4)

    def test_empty_corpus(self):
        with self.assertRaises(EmptyResultError):
            ablation_overlap([], self.lexicon)


if __name__ == '__main__':
    unittest.main()
