"""
Helpers shared by the CLI command modules
"""
import logging
import os
from functools import wraps
from typing import Any, Dict

from app.core.config import DEFAULT_RUN_DIR
from app.core.exceptions import MicroSegNetError

logger = logging.getLogger(__name__)


def command_handler(func):
    """Turn a command function into an exit code; pipeline errors are logged, not raised"""
    @wraps(func)
    def decorated(args) -> int:
        try:
            result = func(args)
            return 0 if result is None else int(result)
        except MicroSegNetError as e:
            logger.error(f"[ERROR] {args.command} failed: {e}")
            return 1
    return decorated


def run_dir(args) -> str:
    """Output directory for a command (global --out, falls back to the configured run dir)"""
    path = getattr(args, "out", None) or DEFAULT_RUN_DIR
    os.makedirs(path, exist_ok=True)
    return path


def config_overrides(args, *names: str) -> Dict[str, Any]:
    """Collect non-None CLI values for config field names"""
    values = {name: getattr(args, name, None) for name in names}
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return {key: value for key, value in values.items() if value is not None}
