"""FastAPI dependency injection."""
from fastapi import Request

from src.repositories.feature_store_repo import StoreRegistry


async def get_store_registry(request: Request) -> StoreRegistry:
    """Get the shared store registry from app state."""
    return request.app.state.stores
