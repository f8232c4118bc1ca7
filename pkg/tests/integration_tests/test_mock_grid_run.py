import csv
import json
import os
import unittest
from pathlib import Path
from urllib.parse import urlparse
from unittest import mock

import requests

from src.core.errors import DomainError, StartupError
from src.core.experiment_engine import ExperimentEngine, grid_cells
from src.core.model_manager import ModelSpec
from src.integrations.chat_completions_api import ChatCompletionsClient
from src.integrations.mock_endpoint import MockEndpoint, load_fixtures, mock_endpoint
from src.main import main
from src.reporting.archive import read_archive_csv, read_transcripts, transcripts_to_records
from src.utils.config import RunConfig
from tests.test_utils import MOCK_GRID_PATH, MODEL_A, MODEL_B, generate_temp_dir


def grid_config(base_url, **overrides):
    values = dict(
        base_url=base_url,
        api_key_env="NEUTRO_EVAL_MOCK_KEY",
        models=(ModelSpec(MODEL_A, provider="Anthropic"), ModelSpec(MODEL_B, provider="Mistral")),
        stimuli=("paradox", "ignorance"),
        strategies=("S1", "S4"),
        repetitions=2,
        parallelism=2,
        retry_limit=0,
        request_timeout=10.0,
    )
    values.update(overrides)
    return RunConfig(**values)


class TestMockGridRun(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.fixtures = load_fixtures(MOCK_GRID_PATH)
        cls.endpoint = MockEndpoint(cls.fixtures).start()

    @classmethod
    def tearDownClass(cls):
        cls.endpoint.stop()

    def setUp(self):
        self.endpoint.reset()
        self.temp_dir = generate_temp_dir()
        self.root = Path(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def _engine(self, **overrides):
        config = grid_config(self.endpoint.url, **overrides)
        client = ChatCompletionsClient(base_url=config.base_url, api_key="test", retry_limit=0, timeout=10.0)
        return config, ExperimentEngine(config, client=client)

    def test_fixture_file_covers_the_grid(self):
        self.assertEqual(len(self.fixtures), 16)
        text, finish_reason = self.fixtures[(MODEL_B, "ignorance", "S4", 2)]
        self.assertEqual(finish_reason, "length")
        self.assertFalse(text.endswith("}"))

    def test_full_grid_through_the_wire(self):
        config, engine = self._engine()
        archive = engine.run(self.root / "grid.ndjson")

        self.assertEqual(len(archive), 16)
        self.assertTrue(archive.is_complete(config))
        self.assertTrue(all(t.status == "ok" for t in archive))
        expected = [(m, s, st, rep) for (m, s, st) in grid_cells(config) for rep in (1, 2)]
        self.assertEqual([(t.model, t.stimulus, t.strategy.value, t.rep) for t in archive], expected)

        records = {r.key(): r for r in transcripts_to_records(read_transcripts(self.root / "grid.ndjson"))}
        self.assertEqual(len(records), 16)
        truncated = records[(MODEL_B, "ignorance", "S4", 2)]
        self.assertEqual(truncated.status, "truncated")
        self.assertEqual(sum(1 for r in records.values() if not r.is_valid), 1)

        self.assertTrue(records[(MODEL_A, "paradox", "S1", 1)].hyper_truth)
        self.assertEqual(records[(MODEL_B, "paradox", "S1", 2)].scalar.as_tuple(), (0.0, 1.0, 0.0))
        self.assertEqual(records[(MODEL_A, "ignorance", "S4", 2)].losses[0].what, "Finite universe")

    def test_repeated_run_replays_from_rep_one(self):
        _, engine = self._engine(models=(ModelSpec(MODEL_A, provider="Anthropic"),), strategies=("S1",))
        first = engine.run()
        self.endpoint.reset()
        second = engine.run()
        self.assertEqual([t.response_text for t in first], [t.response_text for t in second])

    def test_requests_beyond_the_fixtures_are_http_errors(self):
        _, engine = self._engine(models=(ModelSpec(MODEL_A, provider="Anthropic"),), strategies=("S1",),
                                 stimuli=("paradox",), repetitions=3)
        archive = engine.run()
        self.assertEqual([t.status for t in archive], ["ok", "ok", "http_error(404)"])
        self.assertEqual(archive.transcripts[-1].http_status, 404)

    def test_unknown_prompt_is_rejected(self):
        response = requests.post(
            f"{self.endpoint.url}/chat/completions",
            json={"model": MODEL_A, "messages": [{"role": "user", "content": "hello"}]},
            timeout=10,
        )
        self.assertEqual(response.status_code, 404)
        self.assertIn("no fixture", response.json()["error"]["message"])

    def test_malformed_request_is_rejected(self):
        response = requests.post(f"{self.endpoint.url}/chat/completions", data="not json", timeout=10)
        self.assertEqual(response.status_code, 400)


class TestMockEndpointLifecycle(unittest.TestCase):

    def test_needs_fixtures(self):
        with self.assertRaises(DomainError):
            MockEndpoint({})

    def test_url_requires_a_running_server(self):
        endpoint = MockEndpoint(load_fixtures(MOCK_GRID_PATH))
        with self.assertRaises(StartupError):
            endpoint.url

    def test_helper_returns_a_running_endpoint(self):
        endpoint = mock_endpoint(load_fixtures(MOCK_GRID_PATH))
        try:
            self.assertTrue(endpoint.url.endswith("/v1"))
        finally:
            endpoint.stop()
        with self.assertRaises(StartupError):
            endpoint.url

    def test_port_in_use_is_a_startup_error(self):
        fixtures = load_fixtures(MOCK_GRID_PATH)
        with MockEndpoint(fixtures) as first:
            with self.assertRaises(StartupError):
                MockEndpoint(fixtures, port=urlparse(first.url).port).start()


class TestCliRunAgainstMock(unittest.TestCase):

    def test_run_command_writes_transcripts_and_results(self):
        with MockEndpoint(load_fixtures(MOCK_GRID_PATH)) as endpoint, generate_temp_dir() as root:
            config_path = Path(root) / "experiment.yaml"
            config_path.write_text(
                "run:\n"
                f"  base_url: {endpoint.url}\n"
                "  api_key_env: NEUTRO_EVAL_MOCK_KEY\n"
                "  models:\n"
                f"    - {{slug: {MODEL_A}, provider: Anthropic}}\n"
                f"    - {{slug: {MODEL_B}, provider: Mistral}}\n"
                "  stimuli: [paradox, ignorance]\n"
                "  strategies: [S1, S4]\n"
                "  repetitions: 2\n"
                "  parallelism: 2\n"
                "  retry_limit: 0\n"
                "  run_label: mock\n",
                encoding="utf-8",
            )
            out_dir = Path(root) / "out"
            with mock.patch.dict(os.environ, {"NEUTRO_EVAL_MOCK_KEY": "test"}):
                exit_code = main(["--config", str(config_path), "--out-dir", str(out_dir), "run"])
            self.assertEqual(exit_code, 0)

            transcripts = (out_dir / "mock_transcripts.ndjson").read_text(encoding="utf-8").splitlines()
            self.assertEqual(json.loads(transcripts[0])["kind"], "run_header")
            self.assertEqual(len(transcripts), 17)

            with open(out_dir / "mock_results.csv", newline="", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
            self.assertEqual(len(rows), 16)
            self.assertEqual(sum(1 for row in rows if row["parse_status"] == "truncated"), 1)
            self.assertEqual(len(read_archive_csv(out_dir / "mock_results.csv")), 16)

    def test_tautology_run_also_writes_a_record_document(self):
        with generate_temp_dir() as root:
            fixtures_path = Path(root) / "tautology.yaml"
            fixtures_path.write_text(
                "- model: " + MODEL_A + "\n"
                "  stimulus: taut_math\n"
                "  strategy: S4\n"
                "  rep: 1\n"
                "  response: '{\"T\": 1.0, \"I\": 0.0, \"F\": 0.0, \"losses\": "
                "[{\"what\": \"notation\", \"why\": \"base ten assumed\", \"severity\": 0.1}]}'\n",
                encoding="utf-8",
            )
            with MockEndpoint(load_fixtures(fixtures_path)) as endpoint:
                config_path = Path(root) / "tautology_config.yaml"
                config_path.write_text(
                    "run:\n"
                    f"  base_url: {endpoint.url}\n"
                    "  api_key_env: NEUTRO_EVAL_MOCK_KEY\n"
                    f"  models: [{MODEL_A}]\n"
                    "  stimuli: [taut_math]\n"
                    "  strategies: [S4]\n"
                    "  repetitions: 1\n"
                    "  retry_limit: 0\n"
                    "  run_label: tautology\n",
                    encoding="utf-8",
                )
                out_dir = Path(root) / "out"
                with mock.patch.dict(os.environ, {"NEUTRO_EVAL_MOCK_KEY": "test"}):
                    exit_code = main(["--config", str(config_path), "--out-dir", str(out_dir), "run"])
            self.assertEqual(exit_code, 0)
            document = json.loads((out_dir / "tautology_records.json").read_text(encoding="utf-8"))
            self.assertEqual(document["kind"], "tautology")
            self.assertEqual(len(document["records"]), 1)

    def test_run_without_api_key_exits_with_startup_error(self):
        with generate_temp_dir() as root:
            config_path = Path(root) / "experiment.yaml"
            config_path.write_text("run:\n  api_key_env: NEUTRO_EVAL_UNSET_KEY\n", encoding="utf-8")
            with mock.patch.dict(os.environ, {}, clear=False):
                os.environ.pop("NEUTRO_EVAL_UNSET_KEY", None)
                exit_code = main(["--config", str(config_path), "--out-dir", str(Path(root) / "out"), "run"])
            self.assertEqual(exit_code, 2)


if __name__ == '__main__':
    unittest.main()
