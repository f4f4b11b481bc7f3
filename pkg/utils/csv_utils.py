# utils/csv_utils.py
# CSV output with a trailing metadata comment line (config hash, seed).
import csv
import hashlib
import json
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np


def _jsonable(obj):
    if isinstance(obj, float) and obj != obj:
        return "nan"
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    return str(obj)


def config_hash(obj: Any) -> str:
    """sha256 over canonical JSON (sorted keys, no whitespace); first 16 hex digits."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable, ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def format_cell(value) -> str:
    # numpy scalars subclass float but repr as np.float64(...)
    if isinstance(value, np.generic):
        return format_cell(value.item())
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return ";".join(format_cell(v) for v in value)
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
              meta: Optional[Mapping[str, Any]] = None) -> str:
    """Write ``rows`` under ``header``; ``meta`` becomes the last line ``# k=v,k=v``."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    # "\n" line endings so reruns are byte-identical across platforms
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([format_cell(v) for v in row])
        if meta:
            fh.write("# " + ",".join(f"{k}={format_cell(v)}" for k, v in meta.items()) + "\n")
    return path


def read_csv(path: str) -> Tuple[List[str], List[List[str]], Dict[str, str]]:
    """Inverse of :func:`write_csv`: header, rows (as strings) and the metadata trailer."""
    header: List[str] = []
    rows: List[List[str]] = []
    meta: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for part in line[1:].strip().split(","):
                    if "=" in part:
                        k, v = part.split("=", 1)
                        meta[k.strip()] = v.strip()
                continue
            if not line.strip():
                continue
            values = next(csv.reader([line]))
            if not header:
                header = values
            else:
                rows.append(values)
    return header, rows, meta
