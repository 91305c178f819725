"""CSV/JSON rendering of trajectories and result tables.

Floats are written with 17 significant digits so every value parses back
to the identical double.
"""

from __future__ import annotations

import csv
import io
import json
import os
from typing import Mapping, Optional, Sequence

import numpy as np

from .exceptions import InvalidParameters
from .oracle import Trajectory

FORMATS = ("csv", "json")


def fmt(value) -> str:
    """Render one cell; floats get 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def trajectory_columns(traj: Trajectory, reduced: bool = False) -> dict[str, np.ndarray]:
    cols = {"t": traj.t, "x": traj.x, "theta_e": traj.theta_e}
    if reduced:
        cols["y"] = traj.reduced_y()
    return cols


def render_table(columns: Mapping[str, Sequence], fmt_name: str, meta: Optional[Mapping] = None) -> str:
    """Render parallel columns as CSV (header + rows) or a JSON object of arrays."""
    if fmt_name not in FORMATS:
        raise InvalidParameters(f"format must be one of {FORMATS}, got {fmt_name!r}")
    names = list(columns)
    if fmt_name == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*(columns[n] for n in names)):
            writer.writerow([fmt(v) for v in row])
        return buf.getvalue()
    parts = []
    if meta:
        for key, value in meta.items():
            parts.append(f"{json.dumps(key)}: {_json_scalar(value)}")
    for n in names:
        parts.append(f"{json.dumps(n)}: [" + ", ".join(_json_scalar(v) for v in columns[n]) + "]")
    return "{" + ", ".join(parts) + "}\n"


def _json_scalar(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Mapping):
        return "{" + ", ".join(f"{json.dumps(k)}: {_json_scalar(v)}" for k, v in value.items()) + "}"
    if value is None:
        return "null"
    return json.dumps(str(value))


def export_trajectory(
    traj: Trajectory, fmt_name: str = "csv", path: Optional[str | os.PathLike] = None, reduced: bool = False
) -> str:
    """Write a trajectory as ``t,x,theta_e`` (plus ``y`` if ``reduced``).

    Returns the rendered text; also writes it to ``path`` when given.
    """
    if len(traj) == 0:
        raise InvalidParameters("cannot export an empty trajectory")
    meta = None
    if fmt_name == "json":
        p = traj.params
        meta = {
            "params": {"tau1": p.tau1, "tau2": p.tau2, "kvco": p.kvco},
            "omega": traj.omega,
            "stop": traj.stop_label,
        }
    text = render_table(trajectory_columns(traj, reduced), fmt_name, meta)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def parse_table(text: str, fmt_name: str = "csv") -> dict[str, np.ndarray]:
    """Inverse of :func:`render_table` for numeric columns."""
    if fmt_name == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
    if fmt_name == "json":
        obj = json.loads(text)
        return {k: np.array(v, dtype=float) for k, v in obj.items() if isinstance(v, list)}
    raise InvalidParameters(f"format must be one of {FORMATS}, got {fmt_name!r}")
