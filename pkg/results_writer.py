import io
import json
import sys
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from run_config import ECHO_PREFIX, RunConfig

FLOAT_FORMAT = "%.15g"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if np.isnan(value) else value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def render_csv(frame: pd.DataFrame, config: RunConfig, command: str) -> str:
    """CSV text with '# command=' and '# config.key=value' header lines."""
    buffer = io.StringIO()
    buffer.write(f"# command={command}\n")
    for key, value in config.to_items().items():
        buffer.write(f"{ECHO_PREFIX}{key}={value}\n")
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def render_json(payload: Union[Dict, pd.DataFrame], config: RunConfig, command: str) -> str:
    """JSON object with "schema", "command", "config" and the payload."""
    if isinstance(payload, pd.DataFrame):
        body = {"records": payload.to_dict(orient="records")}
    else:
        body = dict(payload)
    document = {"schema": 1, "command": command, "config": config.to_items(), **body}
    return json.dumps(_jsonable(document), indent=2, sort_keys=False) + "\n"


def write_results(payload: Union[Dict, pd.DataFrame], config: RunConfig, command: str,
                  table: Optional[pd.DataFrame] = None) -> str:
    """
    Render and write the output of a command

    Args:
        payload: Report dict (JSON) or DataFrame
        config: Resolved run config, echoed in the header
        command: Subcommand name
        table: Tabular form used when the format is CSV and payload is a dict

    Returns:
        Destination description ('stdout' or the file path)
    """
    if config.format == "json":
        text = render_json(payload, config, command)
    else:
        frame = payload if isinstance(payload, pd.DataFrame) else table
        if frame is None:
            frame = pd.DataFrame([{k: v for k, v in _flatten(payload).items()}])
        text = render_csv(frame, config, command)

    if config.output in ("", "-"):
        sys.stdout.write(text)
        return "stdout"

    path = Path(config.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


def _flatten(record: Dict, prefix: str = "") -> Dict:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}_"))
        elif isinstance(value, (list, tuple)):
            flat[name] = " ".join(str(v) for v in value)
        else:
            flat[name] = value
    return flat
