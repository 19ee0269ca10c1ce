"""Feature store API endpoints."""
from fastapi import APIRouter, Depends, Query

from src.api.dependencies import get_store_registry
from src.api.errors import to_http_exception
from src.repositories.feature_store_repo import StoreRegistry
from src.utils.errors import LGAError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)
router = APIRouter()


@router.get("/stores/summary",
            description="Summarize a feature store",
            responses={
                200: {"description": "Store summary"},
                404: {"description": "Manifest or blob not found"},
                422: {"description": "Store files are invalid"}
            })
async def get_store_summary(
    manifest: str = Query(..., min_length=1, description="Path of the store manifest"),
    registry: StoreRegistry = Depends(get_store_registry)
) -> dict:
    """Load (or reuse) a store and describe it."""
    try:
        return registry.get(manifest).summary()
    except LGAError as e:
        logger.error(f"Error loading store {manifest}: {str(e)}")
        raise to_http_exception(e)
