"""Command-line entry point: ``piqae <subcommand> [--config PATH] [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ExperimentConfig, NoiseConfig, config_from_dict, load_config
from .experiments import RUNNERS, run_and_write


def _lambdas(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lambda list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="piqae", description="Fine-grained Krylov subspace experiments")
    parser.add_argument("subcommand", choices=sorted(RUNNERS))
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for independent grid points")
    parser.add_argument("--shots", type=int, help="shots per measured group or string (default 16384)")
    parser.add_argument("--noise-p", type=float, help="two-qubit error probability")
    parser.add_argument("--lambda", dest="lambdas", type=_lambdas, help="comma-separated noise scales")
    parser.add_argument("--trajectories", type=int, help="noise trajectories per estimate")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.shots is not None:
        cfg.measurement.shots = args.shots
        cfg.measurement.mode = "shots"
    noise_flags = (args.noise_p, args.lambdas, args.trajectories)
    if any(v is not None for v in noise_flags):
        if cfg.noise is None:
            cfg.noise = NoiseConfig()
        if args.noise_p is not None:
            cfg.noise.p = args.noise_p
        if args.lambdas is not None:
            cfg.noise.lambdas = args.lambdas
        if args.trajectories is not None:
            cfg.noise.trajectories = args.trajectories
    cfg.output = args.out
    return cfg.resolve()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        cfg = apply_overrides(cfg, args)
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        path = run_and_write(args.subcommand, cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
