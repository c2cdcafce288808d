"""Command-line entry point.

Subcommands: ``synth``, ``train``, ``pseudo``, ``eval``, ``run`` and
``ablate``. Flags override values read from ``--config``. Exit status is 0 on
success, 1 on usage errors, 2 on data errors and 3 on numeric failures.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, NoReturn, Optional, Sequence, Tuple

import structlog

from .car.pseudo import generate_dataset_tracks
from .config import (
    LoggingConfig,
    SynthConfig,
    TrainConfig,
    build_config,
    resolve_config,
    setup_logging,
)
from .dataio.manifest import load_dataset
from .dataio.models import Dataset
from .dataio.synthetic import MANIFEST_FILE, generate_synthetic_dataset
from .error_handler import get_error_handler
from .evaluation.report import evaluate
from .exceptions import EXIT_OK, CrossLabelError, UsageError
from .experiments.ablation import AblationSpec, run_ablation
from .experiments.pipeline import (
    REPORT_FILE,
    STAGE1_REPORT_FILE,
    evaluate_to_dir,
    load_model,
    run_pipeline,
    write_resolved_config,
)
from .training.trainer import train_stage

logger = structlog.get_logger(__name__)

# (flag, dotted config key, type, help)
FlagSpec = Tuple[str, str, Callable[[str], Any], str]

SYNTH_FLAGS: List[FlagSpec] = [
    ("--seed", "seed", int, "generator seed"),
    ("--num-videos", "num_videos", int, "number of videos"),
    ("--dim", "dim", int, "feature width d"),
    ("--num-categories", "num_categories", int, "categories M including normal"),
    ("--min-length", "min_length", int, "shortest video in snippets"),
    ("--max-length", "max_length", int, "longest video in snippets"),
    ("--anomaly-ratio", "anomaly_ratio", float, "fraction of abnormal videos"),
    ("--shift", "shift_magnitude", float, "category shift magnitude"),
    ("--noise", "noise_std", float, "background noise std"),
]

TRAIN_FLAGS: List[FlagSpec] = [
    ("--seed", "seed", int, "training seed"),
    ("--epochs", "epochs", int, "epochs per stage"),
    ("--batch-size", "batch_size", int, "videos per batch"),
    ("--lr", "lr", float, "Adam learning rate"),
    ("--levels", "levels", int, "pyramid levels L"),
    ("--n", "n", int, "fixed sequence length"),
    ("--hidden-dim", "hidden_dim", int, "encoder width"),
    ("--direction", "direction", str, "pseudo direction: none, b2c, c2b, self, both"),
    ("--workers", "workers", int, "per-video gradient threads"),
    ("--gamma", "loss.gamma", float, "focal exponent"),
    ("--alpha", "loss.alpha", float, "focal class weight"),
    ("--k-divisor", "loss.k_divisor", int, "top-K divisor"),
    ("--theta", "refine.theta", float, "binarization threshold"),
    ("--max-gap", "refine.max_gap", int, "largest gap merged between runs"),
    ("--min-run", "refine.min_length", int, "shortest run kept"),
    ("--sigma-b", "refine.sigma_b", float, "boundary taper width"),
    ("--thresholds", "evaluation.thresholds", str, "proposal thresholds, comma list"),
    ("--iou-thresholds", "evaluation.iou_thresholds", str, "IoU list, comma list"),
]


class CLIArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit through ``main`` with status 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _add_flags(parser: argparse.ArgumentParser, flags: List[FlagSpec]) -> None:
    for flag, key, kind, text in flags:
        parser.add_argument(flag, dest=key, type=kind, default=None, help=text)


def _overrides(args: argparse.Namespace, flags: List[FlagSpec]) -> Dict[str, Any]:
    return {key: getattr(args, key) for _, key, _, _ in flags}


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key = value config file")
    parser.add_argument(
        "--car",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="refine pseudo tracks (--no-car uses the plain scale mean)",
    )
    parser.add_argument(
        "--balance",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="resample the minority class 1:1 in every epoch",
    )
    _add_flags(parser, TRAIN_FLAGS)


def _add_manifest(parser: argparse.ArgumentParser, eval_manifest: bool = True) -> None:
    parser.add_argument("--manifest", type=Path, required=True, help="dataset TSV")
    if eval_manifest:
        parser.add_argument(
            "--eval-manifest",
            type=Path,
            help="evaluation dataset TSV (defaults to --manifest)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = CLIArgumentParser(
        prog="crosslabel-vad",
        description="Dual-branch weakly supervised video anomaly detection",
    )
    sub = parser.add_subparsers(
        dest="command", required=True, parser_class=CLIArgumentParser
    )

    synth = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    synth.add_argument("--config", type=Path, help="flat key = value config file")
    synth.add_argument("--out", type=Path, required=True, help="dataset directory")
    _add_flags(synth, SYNTH_FLAGS)

    train = sub.add_parser("train", help="train one stage")
    _add_manifest(train)
    _add_train_flags(train)
    train.add_argument("--stage", type=int, choices=(1, 2), default=None)
    train.add_argument("--pseudo-dir", type=Path, help="pseudo tracks for stage 2")
    train.add_argument("--out", type=Path, required=True, help="run directory")

    pseudo = sub.add_parser("pseudo", help="write pseudo tracks from a checkpoint")
    _add_manifest(pseudo, eval_manifest=False)
    _add_train_flags(pseudo)
    pseudo.add_argument("--checkpoint", type=Path, required=True)
    pseudo.add_argument("--out", type=Path, required=True, help="pseudo directory")

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_manifest(evaluate, eval_manifest=False)
    _add_train_flags(evaluate)
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--out", type=Path, help="write report.tsv and scores/")

    run = sub.add_parser("run", help="both stages, evaluation and summary")
    _add_manifest(run)
    _add_train_flags(run)
    run.add_argument("--out", type=Path, required=True, help="run directory")

    ablate = sub.add_parser("ablate", help="pseudo-label structure ablation")
    _add_manifest(ablate)
    _add_train_flags(ablate)
    ablate.add_argument("--directions", help="comma list of pseudo directions")
    ablate.add_argument("--car-modes", help="comma list of true/false")
    ablate.add_argument("--seeds", help="comma list of seeds")
    ablate.add_argument("--out", type=Path, required=True, help="ablation directory")
    return parser


# ---------------------------------------------------------------------------
# Commands


def _train_config(args: argparse.Namespace, **extra: Any) -> TrainConfig:
    overrides = _overrides(args, TRAIN_FLAGS)
    overrides.update(car=args.car, balance=args.balance, **extra)
    return resolve_config(TrainConfig, args.config, overrides)


def _eval_dataset(args: argparse.Namespace, dataset: Dataset) -> Dataset:
    if getattr(args, "eval_manifest", None) is None:
        return dataset
    return load_dataset(args.eval_manifest)


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(SynthConfig, args.config, _overrides(args, SYNTH_FLAGS))
    generate_synthetic_dataset(cfg, args.out)
    print(args.out / MANIFEST_FILE)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _train_config(args, stage=args.stage)
    dataset = load_dataset(args.manifest)
    write_resolved_config(args.out, cfg)
    result = train_stage(dataset, cfg, out_dir=args.out, pseudo_dir=args.pseudo_dir)
    report_name = STAGE1_REPORT_FILE if cfg.stage == 1 else REPORT_FILE
    evaluate_to_dir(
        result.model,
        _eval_dataset(args, dataset),
        cfg,
        args.out,
        report_name=report_name,
        write_video_scores=cfg.stage == 2,
    )
    print(result.checkpoint)
    return EXIT_OK


def cmd_pseudo(args: argparse.Namespace) -> int:
    cfg = _train_config(args)
    model = load_model(args.checkpoint, cfg)
    dataset = load_dataset(args.manifest)
    quality = generate_dataset_tracks(model, dataset, cfg, args.out)
    for key, value in sorted(quality.items()):
        print(f"{key}\t{'n/a' if value is None else f'{value:.9g}'}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _train_config(args)
    model = load_model(args.checkpoint, cfg)
    dataset = load_dataset(args.manifest)
    if args.out is not None:
        report = evaluate_to_dir(model, dataset, cfg, args.out)
    else:
        report, _ = evaluate(model, dataset, cfg)
    sys.stdout.write(report.to_tsv())
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _train_config(args)
    dataset = load_dataset(args.manifest)
    result = run_pipeline(dataset, cfg, args.out, _eval_dataset(args, dataset))
    sys.stdout.write(result.report.to_tsv())
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _train_config(args)
    spec = build_config(
        AblationSpec,
        {"directions": args.directions, "car": args.car_modes, "seeds": args.seeds},
    )
    dataset = load_dataset(args.manifest)
    rows = run_ablation(spec, dataset, cfg, args.out, _eval_dataset(args, dataset))
    print("\n".join(row.as_row() for row in rows))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "pseudo": cmd_pseudo,
    "eval": cmd_eval,
    "run": cmd_run,
    "ablate": cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, dispatch the subcommand and map errors to exit codes."""
    logging_config = LoggingConfig.from_env()
    setup_logging(
        logging_config.log_level, logging_config.log_format, logging_config.log_file
    )
    handler = get_error_handler()
    try:
        args = build_parser().parse_args(argv)
        with handler.error_context(args.command):
            return COMMANDS[args.command](args)
    except CrossLabelError as e:
        if e not in handler.get_error_history():
            handler.record(e)
        print(e.get_formatted_message(), file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        # --help
        return int(e.code or 0)

