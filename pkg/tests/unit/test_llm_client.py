"""Unit tests for the LLM client utility."""
import json
from unittest.mock import AsyncMock, MagicMock

import anthropic
import httpx
import numpy as np
import pytest

from src.config.config import Settings
from src.utils.errors import (
    ConfigError,
    LLMAuthenticationError,
    LLMRequestError,
    LLMTransportError,
)
from src.utils.llm_client import (
    AnthropicLLMClient,
    ChatCompletionsClient,
    LLMClientFactory,
    RateLimiter,
)
from tests.utils.test_data import chat_completion_body, example_reply_text


class ScriptedServer:
    """httpx transport handler replaying a list of outcomes in order."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, type) and issubclass(outcome, httpx.TransportError):
            raise outcome("scripted failure", request=request)
        status, body = outcome
        return httpx.Response(status, json=body)


def make_client(server: ScriptedServer, retries: int = 3, **kwargs) -> ChatCompletionsClient:
    return ChatCompletionsClient(
        "http://llm.test/v1",
        api_key="secret-key",
        model="test-model",
        retries=retries,
        backoff=0.0,
        transport=httpx.MockTransport(server),
        **kwargs
    )


class TestChatCompletionsClient:
    """Test cases for ChatCompletionsClient."""

    async def test_create_message_success(self):
        # Given: A server answering with the worked example
        server = ScriptedServer([(200, chat_completion_body(example_reply_text()))])
        client = make_client(server)

        # When: Sending a prompt
        reply = await client.create_message("hello", system_prompt="be brief")

        # Then: The reply text is returned and the request is well formed
        assert reply.text == example_reply_text()
        assert reply.retries == 0
        request = server.requests[0]
        assert str(request.url) == "http://llm.test/v1/chat/completions"
        assert request.headers["Authorization"] == "Bearer secret-key"
        body = json.loads(request.content)
        assert body["model"] == "test-model"
        assert body["messages"] == [
            {"role": "system", "content": "be brief"},
            {"role": "user", "content": "hello"},
        ]

    async def test_full_chat_completions_url_accepted(self):
        server = ScriptedServer([(200, chat_completion_body("ok"))])
        client = ChatCompletionsClient(
            "http://llm.test/v1/chat/completions/", api_key="k", model="m",
            transport=httpx.MockTransport(server))
        await client.create_message("hi")
        assert str(server.requests[0].url) == "http://llm.test/v1/chat/completions"

    async def test_timeouts_then_success_records_retries(self):
        # Given: Two timeouts before a good reply
        server = ScriptedServer([httpx.ReadTimeout, httpx.ReadTimeout, (200, chat_completion_body("ok"))])
        client = make_client(server)

        # When: Sending a prompt
        reply = await client.create_message("hi")

        # Then: Success after two retries
        assert reply.text == "ok"
        assert reply.retries == 2
        assert len(server.requests) == 3

    async def test_retries_rate_limit_and_server_errors(self):
        server = ScriptedServer([(429, {}), (503, {}), (200, chat_completion_body("ok"))])
        reply = await make_client(server).create_message("hi")
        assert reply.retries == 2

    async def test_retries_exhausted(self):
        server = ScriptedServer([httpx.ConnectError] * 3)
        with pytest.raises(LLMTransportError, match="after 3 attempts"):
            await make_client(server, retries=2).create_message("hi")

    async def test_unauthorized_is_not_retried(self):
        server = ScriptedServer([(401, {"error": "bad key"})])
        with pytest.raises(LLMAuthenticationError):
            await make_client(server).create_message("hi")
        assert len(server.requests) == 1

    async def test_bad_request_is_not_retried(self):
        server = ScriptedServer([(400, {"error": "bad"})])
        with pytest.raises(LLMRequestError, match="HTTP 400"):
            await make_client(server).create_message("hi")

    async def test_malformed_payload(self):
        server = ScriptedServer([(200, {"choices": []})])
        with pytest.raises(LLMRequestError, match="unexpected chat completion payload"):
            await make_client(server).create_message("hi")

    async def test_embeddings_sorted_by_index(self):
        server = ScriptedServer([(200, {"data": [
            {"index": 1, "embedding": [0.0, 1.0]},
            {"index": 0, "embedding": [1.0, 0.0]},
        ]})])
        client = make_client(server, embedding_model="embed-model")

        vectors = await client.create_embeddings(["a", "b"])

        np.testing.assert_array_equal(vectors, [[1.0, 0.0], [0.0, 1.0]])
        assert str(server.requests[0].url) == "http://llm.test/v1/embeddings"
        assert json.loads(server.requests[0].content) == {"model": "embed-model", "input": ["a", "b"]}

    async def test_embeddings_count_mismatch(self):
        server = ScriptedServer([(200, {"data": [{"index": 0, "embedding": [1.0]}]})])
        with pytest.raises(LLMRequestError, match="expected 2 embeddings"):
            await make_client(server).create_embeddings(["a", "b"])

    async def test_api_key_is_redacted_in_logs(self, caplog):
        server = ScriptedServer([(200, chat_completion_body("ok"))])
        with caplog.at_level("DEBUG", logger="src.utils.llm_client"):
            await make_client(server).create_message("hi")
        assert "secret-key" not in caplog.text
        assert "***REDACTED***" in caplog.text

    def test_missing_api_key(self):
        with pytest.raises(ConfigError, match="LGA_LLM_API_KEY"):
            ChatCompletionsClient("http://llm.test/v1", api_key="", model="m")

    def test_missing_endpoint(self):
        with pytest.raises(ConfigError, match="LGA_LLM_ENDPOINT"):
            ChatCompletionsClient("", api_key="k", model="m")


class TestAnthropicLLMClient:
    """Test cases for AnthropicLLMClient."""

    @pytest.fixture
    def mock_anthropic_response(self):
        mock = MagicMock()
        mock.content = [MagicMock(text="Test response")]
        return mock

    async def test_create_message(self, mock_anthropic_response):
        # Given: A client whose SDK call is mocked
        client = AnthropicLLMClient(api_key="k", model="claude-test", max_tokens=100, temperature=0.5)
        client.client = MagicMock()
        client.client.messages.create = AsyncMock(return_value=mock_anthropic_response)

        # When: Creating a message
        reply = await client.create_message("Test prompt", system_prompt="Test system prompt")

        # Then: The SDK is called with our parameters
        assert reply.text == "Test response"
        client.client.messages.create.assert_awaited_once_with(
            model="claude-test",
            max_tokens=100,
            temperature=0.5,
            messages=[{"role": "user", "content": "Test prompt"}],
            system="Test system prompt",
        )

    async def test_timeout_is_retried(self, mock_anthropic_response):
        client = AnthropicLLMClient(api_key="k", model="m", retries=1, backoff=0.0)
        client.client = MagicMock()
        timeout = anthropic.APITimeoutError(request=httpx.Request("POST", "http://x"))
        client.client.messages.create = AsyncMock(side_effect=[timeout, mock_anthropic_response])

        reply = await client.create_message("hi")

        assert reply.retries == 1

    async def test_authentication_error(self):
        client = AnthropicLLMClient(api_key="k", model="m")
        client.client = MagicMock()
        response = httpx.Response(401, request=httpx.Request("POST", "http://x"))
        client.client.messages.create = AsyncMock(
            side_effect=anthropic.AuthenticationError("bad key", response=response, body=None))

        with pytest.raises(LLMAuthenticationError):
            await client.create_message("hi")

    async def test_embeddings_unsupported(self):
        client = AnthropicLLMClient(api_key="k", model="m")
        with pytest.raises(LLMRequestError, match="does not provide embeddings"):
            await client.create_embeddings(["a"])


class TestLLMClientFactory:
    """Test cases for LLMClientFactory."""

    def test_creates_chat_completions_client(self):
        client = LLMClientFactory.create_client(Settings())
        assert isinstance(client, ChatCompletionsClient)
        assert client.base_url == "http://llm.test/v1"
        assert client.model == "test-model"

    def test_creates_anthropic_client(self, monkeypatch):
        monkeypatch.setenv("LGA_LLM_PROVIDER", "anthropic")
        monkeypatch.setenv("LGA_LLM_ENDPOINT", "")
        assert isinstance(LLMClientFactory.create_client(Settings()), AnthropicLLMClient)

    def test_missing_key(self, monkeypatch):
        monkeypatch.setenv("LGA_LLM_API_KEY", "")
        with pytest.raises(ConfigError, match="LGA_LLM_API_KEY"):
            LLMClientFactory.create_client(Settings())


class TestRateLimiter:
    """Test cases for RateLimiter."""

    async def test_spaces_requests(self, mocker):
        sleep = mocker.patch("src.utils.llm_client.asyncio.sleep", new_callable=AsyncMock)
        limiter = RateLimiter(10.0)

        await limiter.wait()
        await limiter.wait()

        sleep.assert_awaited_once()
        assert 0 < sleep.await_args.args[0] <= 10.0

    async def test_disabled_limiter_never_sleeps(self, mocker):
        sleep = mocker.patch("src.utils.llm_client.asyncio.sleep", new_callable=AsyncMock)
        limiter = RateLimiter(0.0)
        await limiter.wait()
        sleep.assert_not_awaited()
