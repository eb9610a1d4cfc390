"""
Evaluation Commands
evaluate: score a checkpoint on a dataset split
ablate:   sweep the W_hard / W_easy ratio
compare:  train and score the configuration variants side by side
report:   render report.md from the CSV artifacts of a run directory
"""
import logging
import os

from app.core.config import resolve_configs
from app.core.exceptions import ConfigError
from app.shared.command_utils import command_handler, config_overrides, run_dir
from app.shared.plotting import plot_ablation_curve
from app.shared.run_manifest import record_artifacts
from app.modules.synthdata.repository import load_dataset
from app.modules.trainer.commands import TRAIN_FLAGS
from .report import REPORT_ABLATION_PLOT, REPORT_LOSS_PLOT, report
from .repository import ABLATION_PLOT_NAME, OVERLAY_DIR, write_ablation, write_comparison, write_evaluation
from .schemas import DEFAULT_RATIOS, VARIANTS
from .services import ablate_weight_ratio, compare_variants, evaluate

logger = logging.getLogger(__name__)

COMPARE_RUNS = 3


def _float_list(text: str):
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"expected comma separated numbers, got {text!r}") from e


def _add_training_flags(parser):
    parser.add_argument("--data", required=True, help="dataset root containing manifest.json")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--preset", dest="preset_name", default=None, choices=["tiny", "paper"])
    parser.add_argument("--input-size", type=int, default=None)
    parser.add_argument("--device", default=None)
    parser.add_argument("--workers", type=int, default=None)


def register_evaluation_commands(subparsers, common):
    parser = subparsers.add_parser("evaluate", parents=[common], help="Evaluate a checkpoint")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--data", required=True)
    parser.add_argument("--split", default="test", choices=["train", "val", "test"])
    parser.add_argument("--threshold", type=float, default=None)
    parser.add_argument("--overlays", type=int, default=4, help="qualitative overlays to render")
    parser.set_defaults(handler=evaluate_command)

    parser = subparsers.add_parser("ablate", parents=[common], help="Sweep the hard/easy weight ratio")
    _add_training_flags(parser)
    parser.add_argument("--ratios", default=",".join(f"{r:g}" for r in DEFAULT_RATIOS))
    parser.add_argument("--runs-per-ratio", type=int, default=1)
    parser.set_defaults(handler=ablate_command)

    parser = subparsers.add_parser("compare", parents=[common], help="Compare configuration variants")
    _add_training_flags(parser)
    parser.add_argument("--variants", default=",".join(VARIANTS))
    parser.add_argument("--runs", type=int, default=COMPARE_RUNS, help="seeds per variant")
    parser.set_defaults(handler=compare_command)

    parser = subparsers.add_parser("report", parents=[common], help="Render the run report")
    parser.add_argument("--run-dir", default=None, help="run directory to summarize (default: --out)")
    parser.set_defaults(handler=report_command)


@command_handler
def evaluate_command(args):
    expected = resolve_configs(args.config, config_overrides(args))[0] if args.config else None
    records = load_dataset(args.data, split=args.split)
    out = run_dir(args)
    result = evaluate(args.checkpoint, records, threshold=args.threshold, expected_config=expected,
                      overlay_dir=os.path.join(out, OVERLAY_DIR), max_overlays=args.overlays)
    paths = write_evaluation(out, result) + result["overlays"]
    record_artifacts(out, "evaluate", paths)
    return 0


@command_handler
def ablate_command(args):
    model_cfg, train_cfg = resolve_configs(args.config, config_overrides(args, *TRAIN_FLAGS))
    dataset = load_dataset(args.data)
    rows = ablate_weight_ratio(model_cfg, train_cfg, dataset, ratios=_float_list(args.ratios),
                               runs_per_ratio=args.runs_per_ratio)
    out = run_dir(args)
    paths = [
        write_ablation(out, rows),
        plot_ablation_curve(os.path.join(out, ABLATION_PLOT_NAME), [r["ratio"] for r in rows],
                            [r["dice_mean"] for r in rows], [r["hd95_mm_mean"] for r in rows],
                            [r["dice_std"] for r in rows], [r["hd95_mm_std"] for r in rows]),
    ]
    record_artifacts(out, "ablate", paths)
    return 0 if all(r["complete"] for r in rows) else 1


@command_handler
def compare_command(args):
    model_cfg, train_cfg = resolve_configs(args.config, config_overrides(args, *TRAIN_FLAGS))
    dataset = load_dataset(args.data)
    variants = [name.strip() for name in args.variants.split(",") if name.strip()]
    rows = compare_variants(model_cfg, train_cfg, dataset, variants=variants, runs=args.runs)
    out = run_dir(args)
    record_artifacts(out, "compare", [write_comparison(out, rows)])
    for row in rows:
        logger.info(f"[OK] {row['variant']}: dice {row['dice_mean']:.4f}, hard dice {row['hard_dice_mean']:.4f} "
                    f"({row['hard_dice_delta']:+.4f})")
    return 0


@command_handler
def report_command(args):
    target = args.run_dir or run_dir(args)
    path = report(target)
    plots = [os.path.join(target, name) for name in (REPORT_LOSS_PLOT, REPORT_ABLATION_PLOT)]
    record_artifacts(target, "report", [path] + [p for p in plots if os.path.isfile(p)])
    return 0
