"""Test fixtures shared by unit and integration tests."""
import pytest
from httpx import ASGITransport, AsyncClient

from src.main import app
from src.repositories.feature_store_repo import StoreRegistry, save_store
from src.services.synthetic_service import generate_synthetic
from tests.utils.test_data import SEPARABLE_PARAMS


@pytest.fixture(autouse=True)
def mock_env_vars(monkeypatch):
    """Pin LLM settings so a developer's .env cannot leak into tests."""
    monkeypatch.setenv("LGA_LLM_PROVIDER", "openai")
    monkeypatch.setenv("LGA_LLM_ENDPOINT", "http://llm.test/v1")
    monkeypatch.setenv("LGA_LLM_API_KEY", "test-key")
    monkeypatch.setenv("LGA_LLM_MODEL", "test-model")
    monkeypatch.setenv("LGA_LLM_RETRIES", "2")
    monkeypatch.setenv("LGA_LLM_BACKOFF", "0")
    monkeypatch.setenv("LGA_THREADS", "1")
    monkeypatch.setenv("ENABLE_FILE_LOGGING", "false")


@pytest.fixture(autouse=True)
def reset_app_state():
    """Fresh store registry and no overrides for every test."""
    app.state.stores = StoreRegistry()
    app.dependency_overrides = {}
    yield
    app.dependency_overrides = {}


@pytest.fixture
async def async_client():
    """Async client calling the FastAPI app in-process through ASGITransport."""
    async with AsyncClient(
        transport=ASGITransport(app=app),
        base_url="http://test"
    ) as ac:
        yield ac


@pytest.fixture(scope="session")
def separable_store():
    """Well separated synthetic store shared across tests (read-only)."""
    return generate_synthetic(**SEPARABLE_PARAMS)


@pytest.fixture
def small_store():
    """Three classes of four short videos each."""
    return generate_synthetic(
        classes=3, videos_per_class=4, num_frames=6, dim=12, num_phases=3,
        noise_sigma=0.05, phase_separation=1.0, seed=11,
    )


@pytest.fixture
def store_dir(tmp_path, small_store):
    """small_store written to disk; returns the manifest path."""
    return save_store(small_store, tmp_path / "store")
