"""Command-line entry point: ``python -m src.cli <command> ...``."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from src.core.errors import InvalidArgumentError, OdbssError
from src.core.logger import get_logger
from src.core.storage import load_dataset, load_frame, load_matrix, read_json, write_indices, write_json
from src.domains.bench.schemas import BenchConfig
from src.domains.bench.service import BenchService
from src.domains.clustering.schemas import DesignSpace, SpaceSource
from src.domains.design.schemas import Criterion
from src.domains.design.service import DesignService
from src.domains.distances.schemas import Metric
from src.domains.models.schemas import Family, ModelSpec
from src.domains.sampler.schemas import OdbssConfig, SpaceMode
from src.domains.sampler.service import SamplerService

logger = get_logger("odbss.cli")
bench_service = BenchService()
design_service = DesignService()
sampler_service = SamplerService()

EXIT_FAILURE = 2


def _families() -> List[str]:
    return [f.value for f in Family]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odbss", description="Optimal-design-based subsampling")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("subsample", help="select k rows of a CSV dataset")
    sub.add_argument("--data", required=True, type=Path)
    sub.add_argument("--response", help="response column (optional for the linear family)")
    sub.add_argument("--model", required=True, choices=_families())
    sub.add_argument("--k", required=True, type=int)
    sub.add_argument("--k0-frac", dest="k0_fraction", type=float)
    sub.add_argument("--criterion", default="A")
    sub.add_argument("--metric", default=Metric.frobenius.value, choices=[m.value for m in Metric])
    sub.add_argument("--zeta", type=float)
    sub.add_argument("--space", default=SpaceMode.auto.value, choices=[m.value for m in SpaceMode])
    sub.add_argument("--L", dest="L", type=int)
    sub.add_argument("--epsilon", type=float)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", required=True, type=Path)
    sub.add_argument("--no-timings", action="store_true", help="omit timings from the JSON sidecar")

    des = commands.add_parser("design", help="optimal design over a CSV of candidate points")
    des.add_argument("--candidates", required=True, type=Path)
    des.add_argument("--model", required=True, choices=_families())
    des.add_argument("--beta", required=True, help="comma-separated parameter vector")
    des.add_argument("--criterion", default="A")
    des.add_argument("--tol", type=float)
    des.add_argument("--out", required=True, type=Path)

    bench = commands.add_parser("bench", help="run or summarize a simulation study")
    bench.add_argument("action", nargs="?", default="run", choices=["run", "summarize"])
    bench.add_argument("--config", type=Path)
    bench.add_argument("--in", dest="input", type=Path)
    bench.add_argument("--out", required=True, type=Path)
    bench.add_argument("--workers", type=int)
    bench.add_argument("--replicates", type=int)
    return parser


def _parse_beta(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise InvalidArgumentError(f"cannot parse beta {text!r}") from exc


def cmd_subsample(args: argparse.Namespace) -> None:
    dataset = load_dataset(args.data, args.response)
    model = ModelSpec(family=args.model, p=dataset.p)
    overrides = {
        name: value
        for name, value in (("k0_fraction", args.k0_fraction), ("zeta", args.zeta), ("L", args.L), ("epsilon", args.epsilon))
        if value is not None
    }
    config = OdbssConfig(
        k=args.k,
        criterion=args.criterion,
        metric=args.metric,
        space_mode=args.space,
        seed=args.seed,
        **overrides,
    )
    result = sampler_service.odbss(dataset, model, config)
    write_indices(args.out, result.indices)
    sidecar = {"family": model.family.value, **result.to_dict(include_timings=not args.no_timings)}
    write_json(args.out.with_suffix(".json"), sidecar)
    logger.info(f"Wrote {result.indices.size} indices to {args.out}")


def cmd_design(args: argparse.Namespace) -> None:
    points = load_matrix(args.candidates)
    model = ModelSpec(family=args.model, p=points.shape[1])
    candidates = DesignSpace(points=points, source=SpaceSource.full_sample)
    design = design_service.optimize_design(candidates, model, _parse_beta(args.beta), Criterion.parse(args.criterion), tol=args.tol)
    write_json(args.out, design.to_dict())
    logger.info(f"Wrote {design.b}-point design to {args.out}")


def cmd_bench(args: argparse.Namespace) -> None:
    if args.action == "summarize":
        if args.input is None:
            raise InvalidArgumentError("bench summarize needs --in")
        summary = bench_service.summarize(load_frame(args.input))
        args.out.parent.mkdir(parents=True, exist_ok=True)
        summary.to_csv(args.out, index=False)
        logger.info(f"Wrote {len(summary)} summary rows to {args.out}")
        return

    if args.config is None:
        raise InvalidArgumentError("bench needs --config")
    raw = read_json(args.config)
    for name in ("workers", "replicates"):
        if getattr(args, name) is not None:
            raw[name] = getattr(args, name)
    bench_service.run_experiment(BenchConfig(**raw), args.out)


COMMANDS = {"subsample": cmd_subsample, "design": cmd_design, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except OdbssError as exc:
        logger.error(f"{type(exc).__name__}: {exc.detail}")
        return EXIT_FAILURE
    except ValidationError as exc:
        logger.error(f"Invalid arguments: {exc}")
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
