"""Map domain errors onto HTTP errors."""
from fastapi import HTTPException, status
from pydantic import ValidationError

from src.utils.errors import (
    ConfigError,
    DataError,
    EpisodeError,
    InvalidArgumentError,
    MissingBlobError,
    ResponseParsingError,
)


def to_http_exception(error: Exception) -> HTTPException:
    """400 for bad input, 404 for a missing store, 422 for bad data, 500 otherwise."""
    if isinstance(error, EpisodeError) and isinstance(error.__cause__, Exception):
        return to_http_exception(error.__cause__)
    if isinstance(error, (InvalidArgumentError, ConfigError, ValidationError)):
        return HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(error))
    if isinstance(error, MissingBlobError):
        return HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail=str(error))
    if isinstance(error, (DataError, ResponseParsingError)):
        return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(error))
    return HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail="Internal error")
