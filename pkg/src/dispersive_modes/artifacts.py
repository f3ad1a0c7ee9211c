"""Deterministic CSV/JSON output with all-or-nothing writes."""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.16e"  # 17 significant digits


def csv_text(header: list[str], columns: list[np.ndarray]) -> str:
    buf = io.StringIO()
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(buf, data, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="", newline="\n")
    return buf.getvalue()


def field_csv(coord_name: str, value_name: str, coords, values) -> str:
    """``x,re_u,im_u`` or ``k,re_S,im_S`` rows in monotone coordinate order."""
    values = np.asarray(values, dtype=complex)
    return csv_text([coord_name, f"re_{value_name}", f"im_{value_name}"], [coords, values.real, values.imag])


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def manifest_text(manifest: dict) -> str:
    return json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n"


def write_outputs(out_dir, files: dict[str, str]) -> list[Path]:
    """Write every ``name -> text`` entry; each file lands via temp file + rename.

    Callers compute all contents first, so a numerical failure leaves no
    partial outputs behind.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(files):
        target = out / name
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
        try:
            with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(files[name])
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        written.append(target)
    return written
