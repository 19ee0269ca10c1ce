"""Description parsing API endpoints."""
from fastapi import APIRouter

from src.agents.descriptions_agent import parse_llm_response
from src.api.errors import to_http_exception
from src.models.requests import ParseRequest
from src.models.text_anatomy import AtomicDescriptions
from src.utils.errors import LGAError
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)
router = APIRouter()


@router.post("/descriptions/parse",
             response_model=AtomicDescriptions,
             description="Parse a raw LLM reply into atomic descriptions",
             responses={
                 200: {"description": "Reply parsed"},
                 400: {"description": "Invalid input"},
                 422: {"description": "Reply is not in the expected format"}
             })
async def parse_descriptions(request: ParseRequest) -> AtomicDescriptions:
    """Parse an LLM reply."""
    try:
        return parse_llm_response(request.raw, request.num_phases)
    except LGAError as e:
        logger.error(f"Error parsing descriptions: {str(e)}")
        raise to_http_exception(e)
