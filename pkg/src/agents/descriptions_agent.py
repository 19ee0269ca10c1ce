"""Textual anatomy agent: prompt an LLM to split an action label into atomic descriptions."""
import asyncio
import json
import re
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from src.models.text_anatomy import (
    ACTION_LABEL_KEY,
    SCENE_KEY,
    SUB_ACTION_KEY,
    AtomicDescriptions,
    TextAnatomy,
)
from src.utils.errors import InvalidArgumentError, LLMError, ResponseParsingError
from src.utils.llm_client import BaseLLMClient
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

NUMBER_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six",
    7: "seven", 8: "eight", 9: "nine", 10: "ten", 11: "eleven", 12: "twelve",
}

PROMPT_TEMPLATE = (
    "Deduce the scene description and {count} sub-action descriptions from an action label. "
    "The scene description should include possible scene elements, such as humans, objects, and background. "
    "The scene description must consist of visible elements, not abstract descriptions like atmosphere, "
    "mood or social setting. "
    "The sub-action descriptions must follow strict temporal order, focusing on the posture of the people "
    "involved, relevant elements in the scene, and potential interactive objects. "
    "Ignore object textures and dismiss any unlikely or invalid sub-actions, as well as unnecessary "
    "emotional descriptions. "
    "Keep the sub-action descriptions brief and clear and avoid the abstract descriptions such as enjoying "
    "the performance. "
    "Provide a concise answer for both the scene description and the {count} sub-action descriptions, "
    "following the example below:\n"
    "Example:\n"
    "Input: jumping into pool.\n"
    'Output: {{"Action Label": "Jumping into poo", "sub-action description": '
    '["A photo of a person stands at the edge of a pool, preparing to jump in.", '
    '"A photo of a person leaps off the edge, mid-air over the pool.", '
    '"A photo of a person enters the water, creating a splash as they dive in."]}}\n'
    "{note}"
    "Your analysis should be thorough and accurate, considering all relevant aspects of the action to "
    "support your deductions effectively. "
    "Once I provide the action label, please deduce the scene description and {count} sub-action "
    "descriptions accordingly.\n"
    "\n"
    "Input: {label}.\n"
    "Output:"
)

COUNT_NOTE = (
    "Note: the example above shows three sub-action descriptions; your answer must contain exactly "
    "{count} sub-action descriptions ({num} entries in the \"sub-action description\" list).\n"
)

_FENCE = re.compile(r"```(?:json|JSON)?\s*(.*?)```", re.DOTALL)


def spell_count(num: int) -> str:
    """Spell out small counts, fall back to digits."""
    return NUMBER_WORDS.get(num, str(num))


def build_prompt(label: str, num_phases: int = 3) -> str:
    """Build the decomposition prompt for one action label.

    For three phases the text is the published prompt with its example block;
    other counts swap in the spelled-out number and add a note asking for that
    many entries while keeping the three-entry example.

    Raises:
        InvalidArgumentError: If label is blank or num_phases < 1
    """
    if not label or not label.strip():
        raise InvalidArgumentError("label must be non-empty")
    if num_phases < 1:
        raise InvalidArgumentError(f"num_phases must be >= 1, got {num_phases}")
    count = spell_count(num_phases)
    note = "" if num_phases == 3 else COUNT_NOTE.format(count=count, num=num_phases)
    return PROMPT_TEMPLATE.format(count=count, note=note, label=label.strip())


def _json_objects(text: str):
    decoder = json.JSONDecoder()
    position = text.find("{")
    while position != -1:
        try:
            obj, _ = decoder.raw_decode(text, position)
            if isinstance(obj, dict):
                yield obj
        except json.JSONDecodeError:
            pass
        position = text.find("{", position + 1)


def parse_llm_response(raw: str, num_phases: Optional[int] = None) -> AtomicDescriptions:
    """Parse the first JSON object in an LLM reply.

    Code fences are stripped first; surrounding prose is ignored.

    Args:
        raw: Reply text
        num_phases: Expected number of descriptions, if known

    Returns:
        AtomicDescriptions in the reply's order

    Raises:
        ResponseParsingError: If no object, keys missing or wrong arity
    """
    if not raw:
        raise ResponseParsingError("empty LLM response", raw or "")

    fenced = _FENCE.findall(raw)
    candidates = fenced + [raw]
    obj = None
    for candidate in candidates:
        obj = next(_json_objects(candidate), None)
        if obj is not None:
            break
    if obj is None:
        raise ResponseParsingError("no JSON object found in LLM response", raw)

    label = obj.get(ACTION_LABEL_KEY)
    descriptions = obj.get(SUB_ACTION_KEY)
    if not isinstance(label, str) or not label:
        raise ResponseParsingError(f"missing or empty {ACTION_LABEL_KEY!r}", raw)
    if not isinstance(descriptions, list) or not descriptions \
            or not all(isinstance(d, str) for d in descriptions):
        raise ResponseParsingError(f"missing or malformed {SUB_ACTION_KEY!r}", raw)
    if num_phases is not None and len(descriptions) != num_phases:
        raise ResponseParsingError(
            f"expected {num_phases} sub-action descriptions, got {len(descriptions)}", raw)

    scene = obj.get(SCENE_KEY)
    logger.debug(f"Parsed {len(descriptions)} descriptions for {label!r}")
    return AtomicDescriptions(
        label=label,
        descriptions=descriptions,
        scene=scene if isinstance(scene, str) else None,
    )


async def fetch_descriptions(client: BaseLLMClient, label: str, num_phases: int = 3) -> AtomicDescriptions:
    """Ask the LLM for the atomic descriptions of one label.

    Raises:
        LLMAuthenticationError: Credentials rejected
        LLMTransportError: Retries exhausted
        ResponseParsingError: Reply is not in the expected format
    """
    prompt = build_prompt(label, num_phases)
    logger.info(f"Requesting {num_phases} atomic descriptions for {label!r}")
    reply = await client.create_message(prompt=prompt)
    logger.debug("Raw LLM response:\n%s", reply.text)
    parsed = parse_llm_response(reply.text, num_phases)
    return parsed.model_copy(update={"retries": reply.retries})


class FetchResults(NamedTuple):
    """Outcome of a batch fetch: parsed descriptions and per-label failures."""
    fetched: Dict[str, AtomicDescriptions]
    failed: Dict[str, Exception]


async def fetch_many(
    client: BaseLLMClient,
    labels: Sequence[str],
    num_phases: int = 3,
    concurrency: int = 4
) -> FetchResults:
    """Fetch several labels concurrently, keyed by the requested label.

    A failing label is recorded in `failed` and does not cancel the others.
    """
    semaphore = asyncio.Semaphore(max(1, concurrency))

    async def _one(label: str):
        async with semaphore:
            return await fetch_descriptions(client, label, num_phases)

    outcomes = await asyncio.gather(*(_one(label) for label in labels), return_exceptions=True)
    results = FetchResults(fetched={}, failed={})
    for label, outcome in zip(labels, outcomes):
        if isinstance(outcome, (LLMError, ResponseParsingError)):
            logger.error(f"Fetching descriptions for {label!r} failed: {str(outcome)}")
            results.failed[label] = outcome
        elif isinstance(outcome, BaseException):
            raise outcome
        else:
            results.fetched[label] = outcome
    return results


async def embed_descriptions(
    client: BaseLLMClient,
    class_id: int,
    descriptions: AtomicDescriptions,
    include_label: bool = False
) -> TextAnatomy:
    """Embed one class's descriptions into a TextAnatomy via the embeddings endpoint."""
    texts: List[str] = list(descriptions.descriptions)
    if include_label:
        texts = [descriptions.label] + texts
    vectors = await client.create_embeddings(texts)
    label_embedding: Optional[np.ndarray] = vectors[0] if include_label else None
    phases = vectors[1:] if include_label else vectors
    return TextAnatomy(class_id=class_id, phase_embeddings=phases, label_embedding=label_embedding)
