"""
Artifact I/O helpers
Deterministic JSON and CSV writers (byte-identical output for identical input)
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd

from matcha_sim.config import get_config

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_json(path: PathLike) -> Any:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_json(path: PathLike, payload: Any) -> Path:
    """
    Write JSON with sorted keys and a trailing newline

    @param {str|Path} path - Destination file (parents are created)
    @param {object} payload - JSON-serializable document
    @returns {Path} Written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.debug(f"wrote {path}")
    return path


def write_csv(path: PathLike, rows: Iterable[Dict[str, Any]], columns: List[str],
              float_format: Optional[str] = None) -> Path:
    """
    Write rows with a frozen column order

    @param {str|Path} path - Destination file
    @param {iterable} rows - Row dictionaries (extra keys are dropped)
    @param {list} columns - Column contract
    @param {str} float_format - Overrides MATCHA_FLOAT_FORMAT
    @returns {Path} Written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False, float_format=float_format or get_config().float_format,
                 lineterminator='\n')
    logger.debug(f"wrote {path} ({len(frame)} rows)")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)
