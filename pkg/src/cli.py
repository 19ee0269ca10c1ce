"""Command-line entry point: `python -m src.cli <subcommand> ...`.

Exit codes: 0 ok, 2 configuration or usage error, 3 data error, 4 runtime error.
"""
import argparse
import asyncio
import csv
import io
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.agents.descriptions_agent import build_prompt, embed_descriptions, fetch_many
from src.config.config import get_settings
from src.models.feature_store import FeatureStore
from src.models.fusion import FusionWeights
from src.models.run_config import DATASET_ALPHA, RunConfig, load_config_file, resolve_run_config
from src.repositories.description_cache_repo import DescriptionCacheRepository
from src.repositories.feature_store_repo import load_store, save_store
from src.repositories.weights_repo import load_weights, save_weights
from src.services.episode_service import evaluate_run_config
from src.services.fusion_service import identity_weights, init_weights
from src.services.synthetic_service import generate_synthetic, shuffle_labels
from src.utils.errors import (
    ConfigError,
    DataError,
    EpisodeError,
    InvalidArgumentError,
    LGAError,
)
from src.utils.llm_client import LLMClientFactory, RateLimiter
from src.utils.logging_utils import setup_logger

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

SWEEP_COLUMNS = ["sweep_axis", "value", "accuracy", "ci95", "episodes", "seed"]
SWEEP_AXES: Dict[str, tuple] = {
    "alpha": ("alpha", float),
    "L": ("num_phases", int),
    "overlap": ("overlap", int),
    "metric": ("metric", str),
    "seg_method": ("seg_method", str),
    "text_source": ("text_source", str),
    "way": ("way", int),
    "shot": ("shot", int),
}

# Flag name -> RunConfig field for the flags shared by eval and sweep.
RUN_FLAGS = {
    "store": "store",
    "weights": "weights",
    "dataset": "dataset",
    "n": "way",
    "k": "shot",
    "episodes": "episodes",
    "seed": "seed",
    "queries_per_class": "queries_per_class",
    "seg_method": "seg_method",
    "L": "num_phases",
    "overlap": "overlap",
    "alpha": "alpha",
    "temperature_vt": "temperature_vt",
    "metric": "metric",
    "kshot_reduction": "kshot_reduction",
    "text_source": "text_source",
    "attention_residual": "attention_residual",
    "layer_norm": "layer_norm",
    "normalize": "normalize",
    "threads": "threads",
    "ci_method": "ci_method",
    "episode_log": "episode_log",
}


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the documented exit code."""
    if isinstance(error, EpisodeError) and error.__cause__ is not None:
        return exit_code_for(error.__cause__)
    if isinstance(error, (ConfigError, InvalidArgumentError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, DataError):
        return EXIT_DATA
    return EXIT_RUNTIME


def _write_output(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {out}")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML or JSON file with run settings (flags override it)")
    parser.add_argument("--store", type=Path, help="Feature store manifest (required here or in --config)")
    parser.add_argument("--weights", type=Path, help="Fusion weights file (default: identity weights)")
    parser.add_argument("--dataset", choices=sorted(DATASET_ALPHA), help="Dataset tag selecting the alpha default")
    parser.add_argument("--n", type=int, help="Classes per episode, N (default 5)")
    parser.add_argument("--k", type=int, help="Support videos per class, K (default 1)")
    parser.add_argument("--episodes", type=int, help="Number of episodes (default 10000)")
    parser.add_argument("--seed", type=int, help="Run seed (default 0)")
    parser.add_argument("--queries-per-class", type=int, help="Queries per class (default: one query per episode)")
    parser.add_argument("--seg-method", choices=["cluster", "hard"], help="Temporal segmentation (default cluster)")
    parser.add_argument("--L", type=int, dest="L", help="Number of phases (default 3)")
    parser.add_argument("--overlap", type=int, help="Frames shared with each neighbouring phase (default 1)")
    parser.add_argument("--alpha", type=float, help="Visual weight in [0,1] (default from --dataset, else 1)")
    parser.add_argument("--temperature-vt", type=float, help="Divisor of video-text scores (default 1)")
    parser.add_argument("--metric", choices=["ab_mhm", "bi_mhm"], help="Video-video metric (default ab_mhm)")
    parser.add_argument("--kshot-reduction", choices=["mean_distance", "min_distance"],
                        help="K-shot distance reduction (default mean_distance)")
    parser.add_argument("--text-source", choices=["atomic", "label"],
                        help="Class text for fusion and video-text scores (default atomic)")
    parser.add_argument("--attention-residual", action="store_true", default=None,
                        help="Add the query input to the attention output")
    parser.add_argument("--layer-norm", action="store_true", default=None, help="Post-norm after the FFN residual")
    parser.add_argument("--normalize", action="store_true", default=None, help="L2-normalize features at load")
    parser.add_argument("--threads", type=int, help="Worker pool size (default LGA_THREADS)")
    parser.add_argument("--ci-method", choices=["normal", "exact"], help="95%% interval method (default normal)")
    parser.add_argument("--episode-log", type=Path, help="Write a per-query CSV log here")
    parser.add_argument("--out", type=Path, help="Write output here instead of stdout")


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {field: getattr(args, flag) for flag, field in RUN_FLAGS.items()}
    config = resolve_run_config(file_values, overrides)
    if config.store is None:
        parser.error("the following arguments are required: --store")
    if config.threads is None:
        config = config.model_copy(update={"threads": get_settings().LGA_THREADS})
    return config


def _load_inputs(config: RunConfig) -> Tuple[FeatureStore, FusionWeights]:
    store = load_store(config.store, normalize=config.normalize)
    weights = load_weights(config.weights) if config.weights else identity_weights(store.dim)
    return store, weights


def cmd_eval(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Run one evaluation and print the report as JSON."""
    config = _resolve(args, parser)
    store, weights = _load_inputs(config)
    report = evaluate_run_config(config, store, weights)
    _write_output(report.model_dump_json(indent=2) + "\n", args.out)
    return EXIT_OK


def _parse_axis_values(axis: str, raw: str) -> List[Any]:
    _, cast = SWEEP_AXES[axis]
    tokens = [token.strip() for token in raw.split(",") if token.strip()]
    if not tokens:
        raise InvalidArgumentError(f"--values for axis {axis} must not be empty")
    try:
        return [cast(token) for token in tokens]
    except ValueError as e:
        raise InvalidArgumentError(f"bad value for axis {axis}: {str(e)}") from e


def cmd_sweep(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Evaluate once per axis value with the same base seed; print CSV."""
    values = _parse_axis_values(args.axis, args.values)
    base = _resolve(args, parser)
    store, weights = _load_inputs(base)
    field, _ = SWEEP_AXES[args.axis]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for value in values:
        config = RunConfig.model_validate({**base.model_dump(), field: value})
        logger.info(f"Sweep {args.axis}={value}")
        report = evaluate_run_config(config, store, weights)
        writer.writerow([args.axis, value, report.accuracy, report.ci95_halfwidth, report.episodes, config.seed])
    _write_output(buffer.getvalue(), args.out)
    return EXIT_OK


def cmd_prompt(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Print the description prompt for a label."""
    sys.stdout.write(build_prompt(args.label, args.L))
    sys.stdout.flush()
    return EXIT_OK


def _read_labels(path: Path) -> List[str]:
    if not path.is_file():
        raise ConfigError(f"labels file not found: {path}")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return list(dict.fromkeys(line for line in lines if line and not line.startswith("#")))


def cmd_fetch(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Fetch atomic descriptions for every label missing from the cache."""
    labels = _read_labels(args.labels)
    settings = get_settings()
    client = LLMClientFactory.create_client(settings, limiter=RateLimiter(settings.LGA_LLM_MIN_INTERVAL))
    cache = DescriptionCacheRepository(args.cache)
    missing = cache.missing(labels, args.L)
    logger.info(f"{len(labels)} labels, {len(missing)} not cached")
    results = asyncio.run(fetch_many(client, missing, args.L, args.concurrency)) if missing else None
    if results is not None:
        for label, descriptions in results.fetched.items():
            cache.put(label, descriptions)
    cache.save()
    if results is not None and results.failed:
        logger.error(f"{len(results.failed)} of {len(missing)} labels failed; cached the rest")
        raise next(iter(results.failed.values()))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Write a synthetic store to disk."""
    store = generate_synthetic(
        classes=args.classes,
        videos_per_class=args.videos_per_class,
        num_frames=args.frames,
        dim=args.dim,
        num_phases=args.L,
        noise_sigma=args.noise,
        phase_separation=args.separation,
        seed=args.seed,
        shared_phases=args.shared_phases,
        boundary_jitter=args.jitter,
    )
    if args.shuffle_seed is not None:
        store = shuffle_labels(store, args.shuffle_seed)
    manifest = save_store(store, args.out)
    sys.stdout.write(f"{manifest}\n")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Print a store summary as JSON."""
    store = load_store(args.store)
    sys.stdout.write(json.dumps(store.summary(), indent=2) + "\n")
    return EXIT_OK


def cmd_weights(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Write an initialized or identity weights file."""
    if args.identity:
        weights = identity_weights(args.dim, args.heads, args.hidden)
    else:
        weights = init_weights(args.dim, args.heads, args.hidden, args.seed)
    save_weights(weights, args.out)
    sys.stdout.write(f"{args.out}\n")
    return EXIT_OK


def cmd_embed(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Attach embedded descriptions from the cache as class text of a store."""
    store = load_store(args.store)
    cache = DescriptionCacheRepository(args.cache)
    records = {}
    for class_id, label in sorted(store.classes.items()):
        record = cache.get(label, args.L)
        if record is None:
            raise InvalidArgumentError(f"no cached {args.L}-phase descriptions for class {label!r}; run fetch first")
        records[class_id] = record

    settings = get_settings()
    client = LLMClientFactory.create_client(settings, limiter=RateLimiter(settings.LGA_LLM_MIN_INTERVAL))

    async def _embed_all():
        return await asyncio.gather(*(
            embed_descriptions(client, class_id, record, args.include_label)
            for class_id, record in records.items()))

    texts = asyncio.run(_embed_all())
    embedded = FeatureStore(
        videos=store.videos,
        classes=store.classes,
        text={t.class_id: t for t in texts},
        descriptions=records,
        dim=store.dim,
        phase_starts=store.phase_starts,
    )
    manifest = save_store(embedded, args.out)
    sys.stdout.write(f"{manifest}\n")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    """Start the HTTP API."""
    import uvicorn

    uvicorn.run("src.main:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="lga",
        description="Few-shot action matching with temporal and textual anatomy",
        epilog="Exit codes: 0 ok, 2 configuration error, 3 data error, 4 runtime error.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="Run an episodic evaluation and print a JSON report")
    _add_run_flags(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("sweep", help="Evaluate once per value of one axis and print CSV")
    _add_run_flags(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES), help="Setting to vary")
    p.add_argument("--values", required=True, help="Comma-separated values, e.g. 1,2,3,4")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("prompt", help="Print the atomic description prompt for a label")
    p.add_argument("--label", required=True, help="Action label")
    p.add_argument("--L", type=int, dest="L", default=3, help="Number of sub-actions (default 3)")
    p.set_defaults(handler=cmd_prompt)

    p = sub.add_parser("fetch", help="Fetch atomic descriptions into a cache file (needs LGA_LLM_* settings)")
    p.add_argument("--labels", type=Path, required=True, help="Text file with one label per line")
    p.add_argument("--cache", type=Path, required=True, help="Description cache JSON (created or extended)")
    p.add_argument("--L", type=int, dest="L", default=3, help="Number of sub-actions (default 3)")
    p.add_argument("--concurrency", type=int, default=4, help="Parallel requests (default 4)")
    p.set_defaults(handler=cmd_fetch)

    p = sub.add_parser("synth", help="Generate a synthetic store")
    p.add_argument("--out", type=Path, required=True, help="Output directory")
    p.add_argument("--classes", type=int, default=5, help="Number of classes (default 5)")
    p.add_argument("--videos-per-class", type=int, default=10, help="Videos per class (default 10)")
    p.add_argument("--frames", type=int, default=8, help="Frames per video, T (default 8)")
    p.add_argument("--dim", type=int, default=64, help="Feature dimension, C (default 64)")
    p.add_argument("--L", type=int, dest="L", default=3, help="True number of phases (default 3)")
    p.add_argument("--noise", type=float, default=0.05, help="Noise standard deviation (default 0.05)")
    p.add_argument("--separation", type=float, default=1.0, help="Norm of each phase mean (default 1)")
    p.add_argument("--seed", type=int, default=0, help="Generator seed (default 0)")
    p.add_argument("--shared-phases", action="store_true", help="Classes reorder one shared set of phases")
    p.add_argument("--jitter", type=int, default=1, help="Maximum boundary shift in frames (default 1)")
    p.add_argument("--shuffle-seed", type=int, help="Shuffle labels with this seed (chance-level control)")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("inspect", help="Print a store summary")
    p.add_argument("--store", type=Path, required=True, help="Store manifest")
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("weights", help="Write a fusion weights file")
    p.add_argument("--out", type=Path, required=True, help="Output file")
    p.add_argument("--dim", type=int, required=True, help="Feature dimension, C")
    p.add_argument("--heads", type=int, default=8, help="Attention heads (default 8)")
    p.add_argument("--hidden", type=int, help="FFN hidden size (default 4C)")
    p.add_argument("--seed", type=int, default=0, help="Initialization seed (default 0)")
    p.add_argument("--identity", action="store_true", help="Identity projections and zero FFN")
    p.set_defaults(handler=cmd_weights)

    p = sub.add_parser("embed", help="Embed cached descriptions as class text of a store")
    p.add_argument("--store", type=Path, required=True, help="Input store manifest")
    p.add_argument("--cache", type=Path, required=True, help="Description cache JSON")
    p.add_argument("--out", type=Path, required=True, help="Output store directory")
    p.add_argument("--L", type=int, dest="L", default=3, help="Number of sub-actions (default 3)")
    p.add_argument("--include-label", action="store_true", help="Prepend the label embedding to each text blob")
    p.set_defaults(handler=cmd_embed)

    p = sub.add_parser("serve", help="Start the HTTP API")
    p.add_argument("--host", default="127.0.0.1", help="Bind address (default 127.0.0.1)")
    p.add_argument("--port", type=int, default=8000, help="Port (default 8000)")
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and return its exit code."""
    parser = build_parser()
    command = "command"
    try:
        args = parser.parse_args(argv)
        command = args.command
        handler: Callable[[argparse.Namespace, argparse.ArgumentParser], int] = args.handler
        return handler(args, parser)
    except SystemExit as e:
        if e.code is None:
            return EXIT_OK
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    except (LGAError, ValidationError) as e:
        code = exit_code_for(e)
        logger.error(f"{command} failed: {str(e)}")
        sys.stderr.write(f"error: {str(e)}\n")
        return code
    except Exception as e:
        logger.exception(f"{command} failed unexpectedly: {str(e)}")
        sys.stderr.write(f"error: {str(e)}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
