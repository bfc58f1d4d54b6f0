"""Output helpers shared by the experiments."""
from __future__ import annotations

import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if v is None:
        return ""
    return v


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def versions() -> dict:
    from .. import __version__

    return {"polyshift": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": sys.version.split()[0], "platform": platform.platform()}


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_meta(path, config, **extra) -> None:
    meta = {"config": config.to_dict() if hasattr(config, "to_dict") else config,
            "versions": versions()}
    meta.update(extra)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, default=_jsonable)
        fh.write("\n")
