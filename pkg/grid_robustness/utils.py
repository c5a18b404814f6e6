"""Utility functions for grid-robustness."""

import os
import json
import math
import logging
import traceback
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
import pandas as pd

from . import config


def print_info(msg, *args, **kwargs):
    logging.info(f"[{config.extension_tag}] {msg}", *args, **kwargs)


def print_warning(msg, *args, **kwargs):
    logging.warning(f"[{config.extension_tag}][WARNING] {msg}", *args, **kwargs)


def print_error(msg, *args, **kwargs):
    logging.error(f"[{config.extension_tag}] {msg}", *args, **kwargs)
    logging.debug(traceback.format_exc())


def print_debug(msg, *args, **kwargs):
    logging.debug(f"[{config.extension_tag}] {msg}", *args, **kwargs)


def normalize_path(path: str):
    return str(Path(path).as_posix())


def join_path(path: str, *paths: str):
    return normalize_path(os.path.join(path, *paths))


def case_path(name: str) -> str:
    """Resolve a shipped case name (e.g. 'smib') or return the path unchanged."""
    if os.path.exists(name):
        return name
    candidate = join_path(config.CASES_ROOT, name if name.endswith(".json") else f"{name}.json")
    return candidate if os.path.exists(candidate) else name


def to_jsonable(value: Any) -> Any:
    """Convert numpy values to plain JSON types, writing non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def save_json(filename: str, data: dict):
    """Save a dictionary to a JSON file."""
    try:
        os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
        with open(filename, "w", encoding="utf-8", newline="\n") as f:
            json.dump(to_jsonable(data), f, indent=2, sort_keys=False, allow_nan=False)
            f.write("\n")
    except Exception as e:
        print_error(f"Failed to save JSON file {filename}: {e}")
        raise


def load_json(filename: str) -> Any:
    with open(filename, "r", encoding="utf-8") as f:
        return json.load(f)


def save_table(filename: str, rows: Iterable[dict], columns: Optional[list[str]] = None):
    """Write rows to CSV with a fixed float format so reruns are byte-identical."""
    frame = pd.DataFrame(list(rows), columns=columns)
    try:
        os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
        frame.to_csv(filename, index=False, float_format="%.12g", lineterminator="\n")
    except Exception as e:
        print_error(f"Failed to save table {filename}: {e}")
        raise
    return frame
