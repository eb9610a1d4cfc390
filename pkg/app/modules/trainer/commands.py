"""
Trainer Commands
train: train one model (or --runs N with metric averaging) on a dataset
"""
import logging
import os

from app.core.config import resolve_configs
from app.shared.command_utils import command_handler, config_overrides, run_dir
from app.shared.plotting import plot_loss_curves
from app.shared.run_manifest import record_artifacts
from app.modules.model.repository import save_checkpoint
from app.modules.synthdata.repository import load_dataset
from .repository import (CHECKPOINT_NAME, EPOCH_LOG_NAME, RUNS_NAME, TRAIN_LOG_NAME, write_epoch_log,
                         write_runs_table, write_training_log)
from .services import multi_run, train

logger = logging.getLogger(__name__)

TRAIN_FLAGS = ("preset_name", "input_size", "stem_mode", "epochs", "batch_size", "learning_rate",
               "w_hard", "w_easy", "deep_supervision", "lr_schedule", "augment", "device", "workers", "dilate_px")


def register_trainer_commands(subparsers, common):
    parser = subparsers.add_parser(
        "train", parents=[common], help="Train a segmentation model",
        description="Train a segmentation model. --out is the run directory; the checkpoint is written "
                    f"to <out>/{CHECKPOINT_NAME} next to the training logs.",
    )
    parser.add_argument("--data", required=True, help="dataset root containing manifest.json")
    parser.add_argument("--preset", dest="preset_name", default=None, choices=["tiny", "paper"])
    parser.add_argument("--input-size", type=int, default=None)
    parser.add_argument("--stem", dest="stem_mode", default=None, choices=["hybrid", "pure"])
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--lr", dest="learning_rate", type=float, default=None)
    parser.add_argument("--w-hard", type=float, default=None)
    parser.add_argument("--w-easy", type=float, default=None)
    parser.add_argument("--no-deep-supervision", dest="deep_supervision", action="store_const", const=False,
                        default=None)
    parser.add_argument("--lr-schedule", default=None, choices=["none", "poly"])
    parser.add_argument("--augment", action="store_const", const=True, default=None)
    parser.add_argument("--dilate-px", type=int, default=None,
                        help="hard-region dilation; must match the radius of cached hard masks")
    parser.add_argument("--device", default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--runs", type=int, default=1, help="independent runs with seeds seed..seed+runs-1")
    parser.set_defaults(handler=train_command)


@command_handler
def train_command(args):
    model_cfg, train_cfg = resolve_configs(args.config, config_overrides(args, *TRAIN_FLAGS))
    dataset = load_dataset(args.data)
    out = run_dir(args)

    if args.runs > 1:
        report = multi_run(model_cfg, train_cfg, dataset, n_runs=args.runs)
        path = write_runs_table(os.path.join(out, RUNS_NAME), report)
        record_artifacts(out, "train", [path])
        return 0 if report["completed"] else 1

    checkpoint, log = train(model_cfg, train_cfg, dataset)
    paths = [
        save_checkpoint(os.path.join(out, CHECKPOINT_NAME), checkpoint),
        write_training_log(os.path.join(out, TRAIN_LOG_NAME), log),
        write_epoch_log(os.path.join(out, EPOCH_LOG_NAME), log),
        plot_loss_curves(os.path.join(out, "loss_curve.png"), {"loss": log.loss_curve}),
    ]
    record_artifacts(out, "train", paths)
    logger.info(f"[OK] Training artifacts written to {out}")
    return 0
