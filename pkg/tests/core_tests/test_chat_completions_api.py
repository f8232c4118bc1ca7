import json
import unittest

import requests
import responses

from src.core.prompt_templates import Strategy, build_prompt
from src.integrations.chat_completions_api import (
    STATUS_EXHAUSTED,
    STATUS_OK,
    STATUS_TIMEOUT,
    ChatCompletionsClient,
    build_chat_payload,
)

BASE_URL = "https://llm.example.test/api/v1"
ENDPOINT = f"{BASE_URL}/chat/completions"


def completion_body(text, finish_reason="stop"):
    return {"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": finish_reason}]}


class TestBuildChatPayload(unittest.TestCase):

    def test_payload_is_deterministic_compact_json(self):
        pair = build_prompt(Strategy.S1_NEUTROSOPHIC, "This sentence is false.")
        first = build_chat_payload("qwen/qwen3-235b-a22b", pair, 0.7, 500)
        second = build_chat_payload("qwen/qwen3-235b-a22b", pair, 0.7, 500)
        self.assertEqual(first, second)
        self.assertNotIn(b", ", first[:40])
        body = json.loads(first)
        self.assertEqual(body["model"], "qwen/qwen3-235b-a22b")
        self.assertEqual(body["max_tokens"], 500)
        self.assertNotIn("top_p", body)
        self.assertEqual([m["role"] for m in body["messages"]], ["system", "user"])

    def test_top_p_and_ablation_messages(self):
        pair = build_prompt(Strategy.S5_ABLATION, "2+2=4")
        body = json.loads(build_chat_payload("m", pair, 0.7, 1000, top_p=0.9))
        self.assertEqual(body["top_p"], 0.9)
        self.assertEqual(len(body["messages"]), 1)


class TestChatCompletionsClient(unittest.TestCase):

    def setUp(self):
        self.sleeps = []
        self.client = ChatCompletionsClient(
            BASE_URL, "sk-test", timeout=5, retry_limit=3, retry_base_delay=0.5, sleep=self.sleeps.append
        )
        self.payload = b'{"model":"m","messages":[]}'

    @responses.activate
    def test_success_returns_text_and_sends_bearer_token(self):
        responses.add(responses.POST, ENDPOINT, json=completion_body('{"T": 0.5}'), status=200)
        result = self.client.complete(self.payload)
        self.assertTrue(result.ok)
        self.assertEqual(result.status, STATUS_OK)
        self.assertEqual(result.text, '{"T": 0.5}')
        self.assertEqual(result.attempts, 1)
        self.assertEqual(result.finish_reason, "stop")
        request = responses.calls[0].request
        self.assertEqual(request.headers["Authorization"], "Bearer sk-test")
        self.assertEqual(request.body, self.payload)

    @responses.activate
    def test_rate_limit_is_retried_with_doubling_backoff(self):
        responses.add(responses.POST, ENDPOINT, json={"error": "slow down"}, status=429)
        responses.add(responses.POST, ENDPOINT, json={"error": "busy"}, status=503)
        responses.add(responses.POST, ENDPOINT, json=completion_body("done"), status=200)
        result = self.client.complete(self.payload)
        self.assertTrue(result.ok)
        self.assertEqual(result.attempts, 3)
        self.assertEqual(self.sleeps, [0.5, 1.0])

    @responses.activate
    def test_exhausted_retries(self):
        responses.add(responses.POST, ENDPOINT, json={"error": "down"}, status=500)
        result = self.client.complete(self.payload)
        self.assertEqual(result.status, STATUS_EXHAUSTED)
        self.assertEqual(result.attempts, 4)
        self.assertEqual(self.sleeps, [0.5, 1.0, 2.0])
        self.assertEqual(result.text, "")

    @responses.activate
    def test_without_retries_the_raw_status_is_kept(self):
        client = ChatCompletionsClient(BASE_URL, "k", retry_limit=0, sleep=self.sleeps.append)
        responses.add(responses.POST, ENDPOINT, json={}, status=502)
        result = client.complete(self.payload)
        self.assertEqual(result.status, "http_error(502)")
        self.assertEqual(self.sleeps, [])

    @responses.activate
    def test_client_errors_are_not_retried(self):
        responses.add(responses.POST, ENDPOINT, json={"error": "bad key"}, status=401)
        result = self.client.complete(self.payload)
        self.assertEqual(result.status, "http_error(401)")
        self.assertEqual(result.http_status, 401)
        self.assertEqual(len(responses.calls), 1)

    @responses.activate
    def test_timeout_is_retried(self):
        responses.add(responses.POST, ENDPOINT, body=requests.Timeout("read timed out"))
        responses.add(responses.POST, ENDPOINT, json=completion_body("late"), status=200)
        result = self.client.complete(self.payload)
        self.assertTrue(result.ok)
        self.assertEqual(result.attempts, 2)

    @responses.activate
    def test_timeout_status_when_retries_disabled(self):
        client = ChatCompletionsClient(BASE_URL, "k", retry_limit=0, sleep=self.sleeps.append)
        responses.add(responses.POST, ENDPOINT, body=requests.Timeout("read timed out"))
        self.assertEqual(client.complete(self.payload).status, STATUS_TIMEOUT)

    @responses.activate
    def test_connection_error_is_not_retried(self):
        responses.add(responses.POST, ENDPOINT, body=requests.ConnectionError("refused"))
        result = self.client.complete(self.payload)
        self.assertEqual(result.status, "http_error(0)")
        self.assertEqual(self.sleeps, [])

    @responses.activate
    def test_body_without_content_gives_empty_text(self):
        responses.add(responses.POST, ENDPOINT, json={"choices": []}, status=200)
        result = self.client.complete(self.payload)
        self.assertTrue(result.ok)
        self.assertEqual(result.text, "")

    @responses.activate
    def test_length_finish_reason_is_reported(self):
        responses.add(responses.POST, ENDPOINT, json=completion_body('{"T": 0.1', "length"), status=200)
        self.assertEqual(self.client.complete(self.payload).finish_reason, "length")


if __name__ == '__main__':
    unittest.main()
