"""
Report and curve files.

Every experiment writes ``report.json`` with a ``metadata`` block (time,
version, command) kept apart from the ``payload`` so payloads can be
compared byte for byte, plus CSV curves for plotting.
"""

import hashlib
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def dump_payload(payload: dict) -> str:
    """Canonical JSON of a payload (sorted keys, non-finite as strings)."""
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2)


def payload_digest(payload: dict) -> str:
    """SHA-256 of the canonical payload JSON."""
    return hashlib.sha256(dump_payload(payload).encode()).hexdigest()


def write_report(
    out_dir: Union[str, Path], command: str, payload: dict
) -> Path:
    """
    Write ``report.json`` into out_dir.

    Args:
        out_dir: Output directory (created if missing)
        command: Subcommand that produced the payload
        payload: JSON-ready report body

    Returns:
        Path of the written file
    """
    from . import __version__

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    document = {
        "metadata": {
            "command": command,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
            "payload_sha256": payload_digest(payload),
        },
        "payload": _jsonable(payload),
    }
    path = out_dir / "report.json"
    with open(path, "w", newline="\n") as f:
        json.dump(document, f, sort_keys=True, indent=2)
        f.write("\n")
    logger.info("Wrote %s", path)
    return path


def read_report(path: Union[str, Path]) -> dict:
    with open(path) as f:
        return json.load(f)


def write_curve(
    out_dir: Union[str, Path],
    name: str,
    rows: Sequence[Sequence[float]],
    columns: Sequence[str],
) -> Path:
    """
    Write a curve as CSV: header row, comma separated, LF line endings,
    17 significant digits.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    frame = pd.DataFrame([list(r) for r in rows], columns=list(columns))
    frame.to_csv(
        path,
        index=False,
        float_format=CSV_FLOAT_FORMAT,
        lineterminator="\n",
    )
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path
