"""Evaluation API endpoints."""
from fastapi import APIRouter, Depends, HTTPException, status
from fastapi.concurrency import run_in_threadpool

from src.api.dependencies import get_store_registry
from src.api.errors import to_http_exception
from src.models.episode import EvalReport
from src.models.requests import EvaluationRequest
from src.models.run_config import RunConfig
from src.repositories.feature_store_repo import StoreRegistry
from src.repositories.weights_repo import load_weights
from src.services.episode_service import evaluate_run_config
from src.services.fusion_service import identity_weights
from src.utils.errors import LGAError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)
router = APIRouter()


def _evaluate(config: RunConfig, registry: StoreRegistry) -> EvalReport:
    store = registry.get(config.store, normalize=config.normalize)
    weights = load_weights(config.weights) if config.weights else identity_weights(store.dim)
    return evaluate_run_config(config, store, weights)


@router.post("/evaluations",
             response_model=EvalReport,
             description="Run an episodic evaluation",
             responses={
                 200: {"description": "Evaluation report"},
                 400: {"description": "Invalid configuration"},
                 404: {"description": "Store or weights not found"},
                 422: {"description": "Store files are invalid"}
             })
async def create_evaluation(
    config: EvaluationRequest,
    registry: StoreRegistry = Depends(get_store_registry)
) -> EvalReport:
    """Evaluate in a worker thread and return the report."""
    if config.store is None:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail="store is required")
    try:
        return await run_in_threadpool(_evaluate, config, registry)
    except LGAError as e:
        logger.error(f"Error running evaluation: {str(e)}")
        raise to_http_exception(e)
