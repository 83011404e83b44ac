import os
import re
from pathlib import Path
from typing import Dict, Optional

from lockesim.config import ARTIFACT_DIR


def ensure_artifact_dir(directory=None) -> Path:
    """Create the artifact directory if it doesn't exist"""
    path = Path(directory or ARTIFACT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_text(path, text: str) -> Path:
    """Write to a temporary file first, then rename for atomicity"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_name(path.name + ".tmp")
    with open(temp_file, "w") as f:
        f.write(text)
    os.replace(temp_file, path)
    return path


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name).strip("-") or "run"


def save_failure(name: str, trace: str, schedule: str, report: str,
                 directory=None) -> Dict[str, Path]:
    """Persist what is needed to replay a failed run: trace, schedule and report"""
    base = ensure_artifact_dir(directory)
    stem = _slug(name)
    return {
        "trace": write_text(base / f"{stem}.trace", trace),
        "schedule": write_text(base / f"{stem}.schedule", schedule),
        "report": write_text(base / f"{stem}.report", report),
    }


def read_text(path) -> Optional[str]:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        return None
