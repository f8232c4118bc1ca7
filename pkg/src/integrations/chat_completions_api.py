"""
Client for OpenAI-compatible chat-completions endpoints.
Sends pre-serialized request bodies, retries rate limits, server errors and timeouts with
exponential backoff, and reports every outcome as a CompletionResult instead of raising.
"""

import json
import time
from dataclasses import dataclass

import requests

from src.utils.logger import log_traced, logger, tracer

STATUS_OK = "ok"
STATUS_TIMEOUT = "timeout"
STATUS_EXHAUSTED = "exhausted_retries"


def http_error_status(code):
    return f"http_error({code})"


def build_chat_payload(model_slug, pair, temperature, max_tokens, top_p=None):
    """
    Serializes a chat-completions request body.

    Args:
        model_slug (str): Endpoint model identifier.
        pair (PromptPair): System and user messages (an empty system message is omitted).
        temperature (float): Sampling temperature.
        max_tokens (int): Completion token limit.
        top_p (float, optional): Nucleus sampling mass; left out of the body when None.

    Returns:
        bytes: Compact UTF-8 JSON; identical inputs give identical bytes.
    """
    body = {
        "model": model_slug,
        "messages": pair.messages(),
        "temperature": temperature,
        "max_tokens": max_tokens,
    }
    if top_p is not None:
        body["top_p"] = top_p
    return json.dumps(body, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class CompletionResult:
    status: str
    text: str = ""
    http_status: int = 0
    attempts: int = 1
    finish_reason: str = ""
    error: str = ""

    @property
    def ok(self):
        return self.status == STATUS_OK


class ChatCompletionsClient:
    def __init__(self, base_url, api_key, timeout=60.0, retry_limit=3, retry_base_delay=1.0,
                 session=None, sleep=time.sleep):
        """
        Initializes the client for one endpoint.

        Args:
            base_url (str): Endpoint root, e.g. https://openrouter.ai/api/v1.
            api_key (str): Bearer token. Never logged.
            timeout (float): Per-request timeout in seconds.
            retry_limit (int): Retries after the first attempt on 429, 5xx and timeouts.
            retry_base_delay (float): Backoff before the first retry; doubles per attempt.
            session (requests.Session, optional): HTTP session; module-level requests by default.
            sleep (callable): Sleep function used between retries.
        """
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self.timeout = timeout
        self.retry_limit = retry_limit
        self.retry_base_delay = retry_base_delay
        self._http = session or requests
        self._sleep = sleep
        logger.info(f"ChatCompletionsClient initialized for {self.endpoint} (retry_limit={retry_limit}).")

    @property
    def endpoint(self):
        return f"{self.base_url}/chat/completions"

    def _headers(self):
        return {
            "Authorization": f"Bearer {self._api_key}",
            "Content-Type": "application/json",
        }

    @staticmethod
    def _retryable(code):
        return code == 429 or 500 <= code <= 599

    def _attempt(self, payload, attempt):
        """Sends one request. Returns (status, text, http_status, finish_reason, error, retryable)."""
        with tracer.start_as_current_span("ChatCompletionAttempt") as span:
            span.set_attribute("attempt", attempt)
            try:
                response = self._http.post(self.endpoint, headers=self._headers(), data=payload, timeout=self.timeout)
            except requests.Timeout as e:
                span.set_attribute("status", STATUS_TIMEOUT)
                return STATUS_TIMEOUT, "", 0, "", str(e), True
            except requests.RequestException as e:
                span.set_attribute("status", http_error_status(0))
                return http_error_status(0), "", 0, "", str(e), False

            span.set_attribute("http_status", response.status_code)
            if not 200 <= response.status_code < 300:
                status = http_error_status(response.status_code)
                return status, "", response.status_code, "", response.text[:200], self._retryable(response.status_code)

            text, finish_reason = self._completion_text(response)
            return STATUS_OK, text, response.status_code, finish_reason, "", False

    @staticmethod
    def _completion_text(response):
        try:
            choice = response.json()["choices"][0]
            content = choice.get("message", {}).get("content")
            return (content if isinstance(content, str) else ""), (choice.get("finish_reason") or "")
        except (ValueError, KeyError, IndexError, TypeError, AttributeError) as e:
            logger.warning(f"Response body has no first-choice message content ({type(e).__name__}); storing empty text.")
            return "", ""

    def complete(self, payload):
        """
        Posts a serialized request body, retrying transient failures.

        Args:
            payload (bytes): Body produced by build_chat_payload.

        Returns:
            CompletionResult: status 'ok', 'http_error(code)', 'timeout' or 'exhausted_retries'.
        """
        attempt = 0
        while True:
            status, text, http_status, finish_reason, error, retryable = self._attempt(payload, attempt)
            if status == STATUS_OK:
                if finish_reason == "length":
                    logger.debug("Completion stopped at the token limit.")
                return CompletionResult(STATUS_OK, text, http_status, attempt + 1, finish_reason)
            if not retryable:
                log_traced(f"Request failed without retry: {status} {error}", level="WARNING", status=status)
                return CompletionResult(status, "", http_status, attempt + 1, error=error)
            if attempt >= self.retry_limit:
                final = STATUS_EXHAUSTED if self.retry_limit > 0 else status
                log_traced(f"Giving up after {attempt + 1} attempt(s): {status}", level="WARNING", status=final)
                return CompletionResult(final, "", http_status, attempt + 1, error=error)
            delay = self.retry_base_delay * (2 ** attempt)
            logger.warning(f"Transient failure {status}; retry {attempt + 1}/{self.retry_limit} in {delay:.1f}s.")
            self._sleep(delay)
            attempt += 1
