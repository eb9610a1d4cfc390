"""
Model Commands
info: configured presets and their parameter counts (computed from shapes, not instantiated)
"""
import json
import logging

from app.core.config import PRESETS, build_model_config
from app.shared.command_utils import command_handler
from .services import parameter_groups_from_config

logger = logging.getLogger(__name__)


def register_model_commands(subparsers, common):
    parser = subparsers.add_parser("info", parents=[common], help="Show model presets and parameter counts")
    parser.add_argument("--stem", dest="stem_mode", default="hybrid", choices=["hybrid", "pure"])
    parser.set_defaults(handler=info_command)


@command_handler
def info_command(args):
    presets = {}
    for name in sorted(PRESETS):
        config = build_model_config(name, stem_mode=args.stem_mode)
        groups = parameter_groups_from_config(config)
        presets[name] = {
            "config": config.model_dump(mode="json"),
            "num_tokens": config.num_tokens,
            "parameter_count": sum(groups.values()),
            "parameter_groups": groups,
        }
    print(json.dumps(presets, indent=2, sort_keys=True))
    return 0
