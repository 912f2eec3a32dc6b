"""CSV and JSON artifact writers."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "TRAJECTORY_COLUMNS",
    "ENERGY_COLUMNS",
    "write_csv",
    "write_trajectory_csv",
    "write_energies_csv",
    "write_stationary_csv",
    "write_json",
    "read_csv",
]

TRAJECTORY_COLUMNS = ("t", "mass", "min_u", "min_v", "linf_u_err", "linf_v_err",
                      "l2_phi", "l2_psi", "E_weighted")
ENERGY_COLUMNS = ("t", "E_weighted", "E_extended", "E_d0", "smallness_h1")


def _cell(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], timestamp: bool = True) -> Path:
    """Write ``rows`` under ``header``.  ``None`` and NaN become empty cells.

    With ``timestamp`` a leading ``# generated <iso time>`` comment line is
    written; the body is otherwise deterministic.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if timestamp:
            fh.write(f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a CSV written by ``write_csv``; empty cells come back as NaN."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) if r[i] else np.nan for r in body])
            for i, name in enumerate(header)}


def write_trajectory_csv(path, traj, timestamp: bool = True) -> Path:
    rows = ([getattr(s, c) for c in TRAJECTORY_COLUMNS] for s in traj.samples)
    return write_csv(path, TRAJECTORY_COLUMNS, rows, timestamp)


def write_energies_csv(path, traj, timestamp: bool = True) -> Path:
    rows = ([getattr(s, c) for c in ENERGY_COLUMNS] for s in traj.samples)
    return write_csv(path, ENERGY_COLUMNS, rows, timestamp)


def write_stationary_csv(path, sol, timestamp: bool = True) -> Path:
    x = sol.grid.x
    rows = zip(x, sol.v_bar.values, sol.u_bar.values)
    return write_csv(path, ("x", "v_bar", "u_bar"), rows, timestamp)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload: dict, timestamp: Optional[bool] = None) -> Path:
    """Write ``payload`` as sorted, indented JSON; non-finite floats become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = _jsonable(payload)
    if timestamp:
        data = dict(data, generated=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path
