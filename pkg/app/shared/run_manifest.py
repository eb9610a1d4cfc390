"""
Run directory artifact manifest (artifacts.json)
"""
import json
import logging
import os
from typing import Dict, List

logger = logging.getLogger(__name__)

MANIFEST_NAME = "artifacts.json"


def load_run_manifest(run_dir: str) -> Dict[str, List[str]]:
    path = os.path.join(run_dir, MANIFEST_NAME)
    if not os.path.isfile(path):
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        logger.warning(f"[WARN] Ignoring unreadable run manifest {path}: {e}")
        return {}


def record_artifacts(run_dir: str, command: str, paths: List[str]) -> str:
    """Register artifact paths (relative to run_dir) under a command name"""
    os.makedirs(run_dir, exist_ok=True)
    manifest = load_run_manifest(run_dir)
    relative = sorted({os.path.relpath(p, run_dir) for p in paths})
    manifest[command] = sorted(set(manifest.get(command, [])) | set(relative))
    path = os.path.join(run_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path
