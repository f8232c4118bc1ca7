"""
Local chat-completions endpoint that serves canned responses from a fixture file.
Requests are mapped back to (model, stimulus, strategy) by matching the prompt text against
build_prompt output; the repetition index comes from a per-cell request counter.
"""

import json
import re
import threading
import time
from pathlib import Path

import yaml
from pytest_httpserver import HTTPServer
from werkzeug.wrappers import Request, Response

from src.core.errors import DomainError, SchemaError, StartupError
from src.core.prompt_templates import Strategy, build_prompt
from src.core.stimuli import stimulus_registry
from src.utils.logger import logger

CHAT_PATH_PATTERN = re.compile(r".*/chat/completions$")


def load_fixtures(path):
    """
    Reads a fixture document.

    Args:
        path (str | Path): YAML file holding a list of entries (optionally under a 'fixtures' key),
            each with model, stimulus, strategy, rep, response and an optional finish_reason.

    Returns:
        dict: (model, stimulus, strategy value, rep) -> (response text, finish_reason).
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle)
    except (OSError, yaml.YAMLError) as e:
        logger.error(f"Cannot load fixtures from {path}: {e}")
        raise SchemaError(f"cannot load fixtures: {e}", path=path) from e

    entries = document.get("fixtures") if isinstance(document, dict) else document
    if entries is None:
        entries = []
    if not isinstance(entries, list):
        raise SchemaError("fixture document must be a list of entries", path=path)

    fixtures = {}
    for index, entry in enumerate(entries, start=1):
        if not isinstance(entry, dict):
            raise SchemaError("fixture entry must be a mapping", line=index, path=path)
        for key in ("model", "stimulus", "strategy", "rep", "response"):
            if key not in entry:
                raise SchemaError("fixture entry is missing a key", column=key, line=index, path=path)
        try:
            strategy = Strategy.parse(entry["strategy"])
        except DomainError as e:
            raise SchemaError(str(e), column="strategy", line=index, path=path) from None
        rep = entry["rep"]
        if isinstance(rep, bool) or not isinstance(rep, int) or rep < 1:
            raise SchemaError("rep must be a positive integer", column="rep", line=index, path=path)
        response = entry["response"]
        if response is None:
            response = ""
        fixtures[(str(entry["model"]), str(entry["stimulus"]), strategy.value, rep)] = (
            str(response),
            str(entry.get("finish_reason") or "stop"),
        )
    logger.info(f"Loaded {len(fixtures)} fixtures from {path}.")
    return fixtures


def _prompt_index():
    index = {}
    for spec in stimulus_registry():
        for strategy in Strategy:
            pair = build_prompt(strategy, spec.statement)
            index[(pair.system, pair.user)] = (spec.id, strategy.value)
    return index


class MockEndpoint:
    def __init__(self, fixtures, host="localhost", port=0):
        """
        Prepares a mock endpoint over a fixture map.

        Args:
            fixtures (dict): Output of load_fixtures (or an equivalent mapping).
            host (str): Interface to bind.
            port (int): Port to bind; 0 picks a free one.
        """
        if not fixtures:
            raise DomainError("mock endpoint needs at least one fixture")
        self.fixtures = dict(fixtures)
        self.host = host
        self.port = port
        self._prompts = _prompt_index()
        self._counters = {}
        self._lock = threading.Lock()
        self._server = None

    @property
    def url(self):
        """Base URL to use as RunConfig.base_url."""
        if self._server is None:
            raise StartupError("mock endpoint is not running")
        return self._server.url_for("/v1")

    def start(self):
        self._server = HTTPServer(host=self.host, port=self.port, threaded=True)
        self._server.expect_request(CHAT_PATH_PATTERN, method="POST").respond_with_handler(self._handle)
        try:
            self._server.start()
        except (OSError, SystemExit) as e:
            self._server = None
            logger.error(f"Mock endpoint could not bind {self.host}:{self.port}: {e}")
            raise StartupError(f"port {self.port} on {self.host} is unavailable") from None
        logger.info(f"Mock endpoint serving {len(self.fixtures)} fixtures at {self.url}.")
        return self

    def stop(self):
        if self._server is not None and self._server.is_running():
            self._server.stop()
            logger.info("Mock endpoint stopped.")
        self._server = None

    def reset(self):
        """Forgets the per-cell request counters so a grid can be replayed from rep 1."""
        with self._lock:
            self._counters.clear()

    def serve_forever(self):
        if self._server is None:
            self.start()
        try:
            while True:
                time.sleep(1.0)
        except KeyboardInterrupt:
            logger.info("Mock endpoint interrupted.")
        finally:
            self.stop()

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc, tb):
        self.stop()

    @staticmethod
    def _error(status, message):
        body = json.dumps({"error": {"code": status, "message": message}}, sort_keys=True)
        return Response(body, status=status, content_type="application/json")

    def _identify(self, messages):
        system = ""
        user = None
        for message in messages:
            if message.get("role") == "system":
                system = message.get("content") or ""
            elif message.get("role") == "user":
                user = message.get("content")
        return self._prompts.get((system, user))

    def _handle(self, request: Request):
        try:
            body = json.loads(request.get_data())
            model = body["model"]
            cell = self._identify(body["messages"])
        except (ValueError, KeyError, TypeError, AttributeError):
            return self._error(400, "malformed chat-completions request")
        if cell is None:
            return self._error(404, f"no fixture matches the prompt sent to {model}")

        stimulus, strategy = cell
        with self._lock:
            rep = self._counters.get((model, stimulus, strategy), 0) + 1
            self._counters[(model, stimulus, strategy)] = rep
        fixture = self.fixtures.get((model, stimulus, strategy, rep))
        if fixture is None:
            return self._error(404, f"no fixture for {model}/{stimulus}/{strategy}/rep {rep}")

        text, finish_reason = fixture
        logger.debug(f"Mock endpoint answering {model}/{stimulus}/{strategy}/rep {rep}.")
        completion = {
            "id": f"mock-{stimulus}-{strategy}-{rep}",
            "object": "chat.completion",
            "model": model,
            "choices": [
                {"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": finish_reason}
            ],
        }
        return Response(json.dumps(completion), status=200, content_type="application/json")


def mock_endpoint(fixtures, host="localhost", port=0):
    """Starts and returns a MockEndpoint; call stop() (or use it as a context manager) when done."""
    return MockEndpoint(fixtures, host=host, port=port).start()
