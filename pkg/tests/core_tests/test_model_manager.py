import unittest

from src.core.errors import ConfigError
from src.core.model_manager import DEFAULT_MODELS, ModelManager, ModelSpec


class TestModelManager(unittest.TestCase):

    def setUp(self):
        self.manager = ModelManager()

    def test_knows_the_five_default_models(self):
        self.assertEqual(len(self.manager.known_models()), 5)
        self.assertEqual({m.slug for m in self.manager.known_models()}, {m.slug for m in DEFAULT_MODELS})

    def test_resolve_by_slug_and_display_name(self):
        by_slug = self.manager.resolve("mistralai/mistral-medium-3.1")
        by_name = self.manager.resolve("Mistral Medium 3.1")
        self.assertEqual(by_slug, by_name)
        self.assertEqual(by_slug.provider, "Mistral")

    def test_unknown_slug_resolves_to_bare_spec(self):
        model = self.manager.resolve("openai/gpt-4o")
        self.assertEqual(model.slug, "openai/gpt-4o")
        self.assertEqual(model.display_name, "openai/gpt-4o")
        self.assertEqual(model.provider, "")

    def test_from_config_applies_override(self):
        model = self.manager.from_config({"slug": "mistralai/mistral-medium-3.1", "max_tokens_override": 1500})
        self.assertEqual(model.max_tokens_override, 1500)
        self.assertEqual(model.display_name, "Mistral Medium 3.1")

    def test_from_config_rejects_bad_entries(self):
        with self.assertRaises(ConfigError):
            self.manager.from_config({"name": "x"})
        with self.assertRaises(ConfigError):
            self.manager.from_config({"slug": "x", "max_tokens_override": 0})

    def test_spec_requires_slug(self):
        with self.assertRaises(ConfigError):
            ModelSpec("  ")


if __name__ == '__main__':
    unittest.main()
