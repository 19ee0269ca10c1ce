"""LLM client utility: OpenAI-compatible chat completions or Anthropic, with retries."""
import asyncio
import json
import time
from abc import ABC, abstractmethod
from typing import Any, Awaitable, Callable, List, NamedTuple, Optional, Tuple, TypeVar

import anthropic
import httpx
import numpy as np
from anthropic import AsyncAnthropic

from src.config.config import Settings
from src.utils.errors import (
    ConfigError,
    LLMAuthenticationError,
    LLMRequestError,
    LLMTransportError,
)
from src.utils.logging_utils import redact_secret, setup_logger

logger = setup_logger(__name__)

T = TypeVar("T")

CHAT_COMPLETIONS_PATH = "/chat/completions"
EMBEDDINGS_PATH = "/embeddings"
RETRYABLE_STATUS_CODES = {408, 409, 429, 500, 502, 503, 504}


class LLMReply(NamedTuple):
    """Reply text plus the number of retries it took."""
    text: str
    retries: int


class _RetryableError(Exception):
    """Internal marker for failures worth another attempt."""
    pass


class RateLimiter:
    """Spaces out requests shared by concurrent callers."""

    def __init__(self, min_interval: float) -> None:
        self.min_interval = min_interval
        self._lock = asyncio.Lock()
        self._last: Optional[float] = None

    async def wait(self) -> None:
        """Block until min_interval has passed since the previous request."""
        if self.min_interval <= 0:
            return
        async with self._lock:
            if self._last is not None:
                delay = self._last + self.min_interval - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
            self._last = time.monotonic()


class BaseLLMClient(ABC):
    """Shared retry policy for every provider."""

    def __init__(
        self,
        api_key: str,
        model: str,
        timeout: float = 30.0,
        retries: int = 3,
        backoff: float = 1.0,
        max_tokens: int = 1024,
        temperature: float = 0.0,
        limiter: Optional[RateLimiter] = None
    ) -> None:
        if not api_key:
            logger.error("LGA_LLM_API_KEY environment variable not set")
            raise ConfigError("LGA_LLM_API_KEY environment variable not set")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.limiter = limiter

    async def _with_retries(self, operation: Callable[[], Awaitable[T]], what: str) -> Tuple[T, int]:
        attempt = 0
        while True:
            if self.limiter is not None:
                await self.limiter.wait()
            try:
                return await operation(), attempt
            except _RetryableError as e:
                if attempt >= self.retries:
                    logger.error(f"{what} failed after {attempt + 1} attempts: {e}")
                    raise LLMTransportError(f"{what} failed after {attempt + 1} attempts: {e}") from e
                delay = self.backoff * (2 ** attempt)
                logger.warning(f"{what} attempt {attempt + 1} failed ({e}); retrying in {delay:.2f}s")
                await asyncio.sleep(delay)
                attempt += 1

    async def create_message(self, prompt: str, system_prompt: Optional[str] = None) -> LLMReply:
        """Send a single user message and return the reply text.

        Args:
            prompt: The user prompt to send
            system_prompt: Optional system prompt

        Returns:
            LLMReply: Reply text and retries spent

        Raises:
            LLMAuthenticationError: If credentials are rejected
            LLMTransportError: If transient failures outlast the retry budget
            LLMRequestError: For other non-retryable HTTP errors
        """
        text, retries = await self._with_retries(
            lambda: self._send_message(prompt, system_prompt), "chat completion")
        return LLMReply(text=text, retries=retries)

    async def create_embeddings(self, texts: List[str]) -> np.ndarray:
        """Embed texts; providers without an embeddings API raise LLMRequestError."""
        vectors, _ = await self._with_retries(lambda: self._send_embeddings(texts), "embeddings")
        return vectors

    @abstractmethod
    async def _send_message(self, prompt: str, system_prompt: Optional[str]) -> str:
        """Perform one request."""
        pass

    async def _send_embeddings(self, texts: List[str]) -> np.ndarray:
        raise LLMRequestError(f"{type(self).__name__} does not provide embeddings")


class ChatCompletionsClient(BaseLLMClient):
    """OpenAI-compatible HTTP client; every call owns its connection."""

    def __init__(self, endpoint: str, *args: Any, embedding_model: str = "text-embedding-3-small",
                 transport: Optional[httpx.AsyncBaseTransport] = None, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        if not endpoint:
            logger.error("LGA_LLM_ENDPOINT environment variable not set")
            raise ConfigError("LGA_LLM_ENDPOINT environment variable not set")
        endpoint = endpoint.rstrip("/")
        if endpoint.endswith(CHAT_COMPLETIONS_PATH):
            endpoint = endpoint[: -len(CHAT_COMPLETIONS_PATH)]
        self.base_url = endpoint
        self.embedding_model = embedding_model
        self.transport = transport

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.api_key}", "Content-Type": "application/json"}

    async def _post(self, path: str, body: dict) -> dict:
        url = self.base_url + path
        headers = self._headers()
        logger.debug(
            f"POST {url} headers={redact_secret(json.dumps(headers), self.api_key)} body={json.dumps(body)}")
        try:
            async with httpx.AsyncClient(timeout=self.timeout, transport=self.transport) as client:
                response = await client.post(url, headers=headers, json=body)
        except httpx.TransportError as e:
            raise _RetryableError(f"{type(e).__name__}: {e}") from e

        logger.debug(f"Response {response.status_code} from {url}: {redact_secret(response.text, self.api_key)}")
        if response.status_code in (401, 403):
            raise LLMAuthenticationError(f"endpoint rejected credentials (HTTP {response.status_code})")
        if response.status_code in RETRYABLE_STATUS_CODES:
            raise _RetryableError(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise LLMRequestError(f"HTTP {response.status_code}: {response.text[:500]}")
        try:
            return response.json()
        except ValueError as e:
            raise LLMRequestError(f"endpoint returned non-JSON body: {response.text[:500]}") from e

    async def _send_message(self, prompt: str, system_prompt: Optional[str]) -> str:
        messages = []
        if system_prompt:
            messages.append({"role": "system", "content": system_prompt})
        messages.append({"role": "user", "content": prompt})
        payload = await self._post(CHAT_COMPLETIONS_PATH, {
            "model": self.model,
            "messages": messages,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        })
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise LLMRequestError(f"unexpected chat completion payload: {str(payload)[:500]}") from e

    async def _send_embeddings(self, texts: List[str]) -> np.ndarray:
        payload = await self._post(EMBEDDINGS_PATH, {"model": self.embedding_model, "input": list(texts)})
        try:
            rows = sorted(payload["data"], key=lambda item: item["index"])
            vectors = np.array([row["embedding"] for row in rows], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise LLMRequestError(f"unexpected embeddings payload: {str(payload)[:500]}") from e
        if vectors.shape[0] != len(texts):
            raise LLMRequestError(f"expected {len(texts)} embeddings, got {vectors.shape[0]}")
        return vectors


class AnthropicLLMClient(BaseLLMClient):
    """Anthropic Messages API client; SDK retries disabled in favour of ours."""

    def __init__(self, *args: Any, base_url: Optional[str] = None, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        logger.debug("Creating new Anthropic client instance")
        self.client = AsyncAnthropic(
            api_key=self.api_key,
            base_url=base_url or None,
            timeout=self.timeout,
            max_retries=0
        )

    async def _send_message(self, prompt: str, system_prompt: Optional[str]) -> str:
        request = {
            "model": self.model,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        if system_prompt:
            request["system"] = system_prompt
        logger.debug(f"Anthropic request: {json.dumps(request)}")
        try:
            message = await self.client.messages.create(**request)
        except (anthropic.AuthenticationError, anthropic.PermissionDeniedError) as e:
            raise LLMAuthenticationError(f"endpoint rejected credentials: {e}") from e
        except (anthropic.APITimeoutError, anthropic.APIConnectionError,
                anthropic.RateLimitError, anthropic.InternalServerError) as e:
            raise _RetryableError(f"{type(e).__name__}: {e}") from e
        except anthropic.APIStatusError as e:
            raise LLMRequestError(f"HTTP {e.status_code}: {e}") from e
        return message.content[0].text


class LLMClientFactory:
    """Factory for creating the configured provider client."""

    @staticmethod
    def create_client(
        settings: Settings,
        limiter: Optional[RateLimiter] = None,
        transport: Optional[httpx.AsyncBaseTransport] = None
    ) -> BaseLLMClient:
        """Create a client from settings.

        Returns:
            BaseLLMClient: The provider implementation

        Raises:
            ConfigError: If the API key (or endpoint for openai) is missing
        """
        common = dict(
            api_key=settings.LGA_LLM_API_KEY,
            model=settings.LGA_LLM_MODEL,
            timeout=settings.LGA_LLM_TIMEOUT,
            retries=settings.LGA_LLM_RETRIES,
            backoff=settings.LGA_LLM_BACKOFF,
            max_tokens=settings.LGA_LLM_MAX_TOKENS,
            temperature=settings.LGA_LLM_TEMPERATURE,
            limiter=limiter,
        )
        if settings.LGA_LLM_PROVIDER == "anthropic":
            return AnthropicLLMClient(base_url=settings.LGA_LLM_ENDPOINT or None, **common)
        return ChatCompletionsClient(
            settings.LGA_LLM_ENDPOINT,
            embedding_model=settings.LGA_LLM_EMBEDDING_MODEL,
            transport=transport,
            **common
        )
