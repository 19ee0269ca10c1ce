"""Prompt API endpoints."""
from fastapi import APIRouter

from src.agents.descriptions_agent import build_prompt
from src.api.errors import to_http_exception
from src.models.requests import PromptRequest, PromptResponse
from src.utils.errors import LGAError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)
router = APIRouter()


@router.post("/prompts",
             response_model=PromptResponse,
             description="Build the atomic description prompt for an action label",
             responses={
                 200: {"description": "Prompt built"},
                 400: {"description": "Invalid input"}
             })
async def create_prompt(request: PromptRequest) -> PromptResponse:
    """Build a prompt."""
    try:
        return PromptResponse(prompt=build_prompt(request.label, request.num_phases))
    except LGAError as e:
        logger.error(f"Error building prompt: {str(e)}")
        raise to_http_exception(e)
