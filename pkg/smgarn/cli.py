"""Command-line entry point: `python -m smgarn <command>`.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 runtime error (e.g. a diverged training run).
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from smgarn.config import get_settings
from smgarn.errors import (
    CheckpointError,
    ConfigFileError,
    ConfigurationError,
    DatasetError,
    DatasetIOError,
    DimensionError,
    DomainError,
    PairingError,
    ParameterError,
    RegistryError,
    SizeError,
)
from smgarn.schemas import SynthParams


logger = logging.getLogger("smgarn")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_USAGE_ERRORS = (ConfigFileError, ParameterError, RegistryError)
_DATA_ERRORS = (
    DatasetError,
    DatasetIOError,
    PairingError,
    CheckpointError,
    ConfigurationError,
    DimensionError,
    DomainError,
    SizeError,
    OSError,
)


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, _USAGE_ERRORS):
        return EXIT_USAGE
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_DATA
    return EXIT_RUNTIME


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def cmd_synth(args: argparse.Namespace) -> int:
    from smgarn.services.config_file import load_synth_params
    from smgarn.services.dataset import synth_dataset
    from smgarn.services.snow_synthesis import MIN_MASK_SIZE

    height, width = args.size
    if height < MIN_MASK_SIZE or width < MIN_MASK_SIZE:
        raise ParameterError(f"--size must be at least {MIN_MASK_SIZE} {MIN_MASK_SIZE}, got {height} {width}")
    params = load_synth_params(args.params, seed=args.seed) if args.params else SynthParams(seed=args.seed)
    ids = synth_dataset(args.out, count=args.count, height=height, width=width, params=params)
    print(f"Wrote {len(ids)} samples to {args.out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    from smgarn.services.checkpoint import load_checkpoint
    from smgarn.services.config_file import load_experiment_config
    from smgarn.services.dataset import load_dataset, require_complete
    from smgarn.services.training import train_loop

    model_cfg, train_cfg = load_experiment_config(args.config)
    samples = list(load_dataset(args.data))
    if not samples:
        raise DatasetError(f"Dataset {args.data} has no images")
    require_complete(samples, need_clean=True, need_mask=model_cfg.needs_gt_mask, root=args.data)

    val_samples = None
    if train_cfg.val_dir is not None:
        val_samples = list(load_dataset(train_cfg.val_dir))
        require_complete(val_samples, need_clean=True, need_mask=model_cfg.needs_gt_mask, root=train_cfg.val_dir)

    resume = load_checkpoint(args.resume) if args.resume else None
    result = train_loop(model_cfg, train_cfg, samples, out_dir=args.out, resume=resume, val_samples=val_samples)
    ckpt = result.checkpoint
    print(f"Trained to epoch {ckpt.epoch} (step {ckpt.global_step}); {len(result.checkpoint_paths)} checkpoint(s) in {args.out}")
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    from smgarn.services.checkpoint import load_checkpoint
    from smgarn.services.inference import list_inputs, restore_files

    model = load_checkpoint(args.ckpt).build_model()
    source = Path(args.input)
    if not source.exists():
        raise DatasetIOError(f"Input not found: {source}")
    written, failed = restore_files(model, list_inputs(source), args.out, save_mask=args.save_mask)
    for path, reason in failed:
        print(f"skipped {path}: {reason}", file=sys.stderr)
    print(f"Restored {len(written)} image(s) into {args.out}")
    if not written:
        return EXIT_DATA
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from smgarn.services.evaluation import evaluate, evaluate_identity

    if args.identity:
        report = evaluate_identity(args.data, args.out)
    else:
        report = evaluate(args.ckpt, args.data, args.out)
    print(report.summary)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    from smgarn.models.variants import grid_variants
    from smgarn.services.ablation import ablation_sweep
    from smgarn.services.config_file import load_experiment_config
    from smgarn.services.dataset import load_dataset

    # unknown grid names fail before any data is read
    grid_variants(args.grid)
    base_cfg, train_cfg = load_experiment_config(args.config)
    samples = list(load_dataset(args.data))
    if not samples:
        raise DatasetError(f"Dataset {args.data} has no images")
    table = ablation_sweep(args.grid, base_cfg, train_cfg, samples, out_dir=args.out)
    print(f"{'rank':>4}  {'variant':<20} {'params':>10}  psnr/ssim")
    for rank, row in enumerate(table.ranked(), start=1):
        print(f"{rank:>4}  {row.variant:<20} {row.params:>10}  {row.report.summary}")
    for check in table.trends:
        print(f"trend {check.name}: {'ok' if check.ok else 'FAILED'} ({check.detail})")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="smgarn", description="Snow removal with mask-guided residual networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Write a synthetic paired dataset.")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--count", type=_positive_int, required=True)
    p.add_argument("--size", type=_positive_int, nargs=2, metavar=("H", "W"), required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--params", type=Path, default=None, help="key = value SynthParams file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="Train a model on a paired dataset.")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--resume", type=Path, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Score a checkpoint (or the raw inputs) against ground truth.")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--ckpt", type=Path)
    which.add_argument("--identity", action="store_true", help="score the snowy inputs themselves")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="Restore one image or a directory of images.")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--save-mask", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("ablate", help="Train and rank every variant of an ablation grid.")
    p.add_argument("--grid", required=True)
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ablate)

    return parser


def configure_logging() -> None:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits with None, usage errors with EXIT_USAGE
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    configure_logging()
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code_for(exc)
        if code == EXIT_RUNTIME:
            logger.exception("smgarn %s failed", args.command)
        print(f"error: {exc}", file=sys.stderr)
        return code
