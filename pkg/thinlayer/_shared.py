from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd

# -------------------------
# Tolerances and output format
# -------------------------
TAU_BC_REL = 1e-8
RESIDUAL_TARGET = 1e-12
SOLVE_RESIDUAL_REL = 1e-10
CONSERVATIVE_TOL = 1e-10
CSV_FLOAT_FORMAT = "%.17g"


# -------------------------
# Errors
# -------------------------
class ThinLayerError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(ThinLayerError, ValueError):
    pass


class DomainError(ThinLayerError, ValueError):
    pass


class PreconditionError(ThinLayerError, ValueError):
    pass


class GridMismatchError(ThinLayerError, TypeError):
    pass


class InternalError(ThinLayerError, RuntimeError):
    pass


class AcceptanceError(ThinLayerError, RuntimeError):
    pass


# -------------------------
# Small numeric helpers
# -------------------------
def sup_norm(values: Any) -> float:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def boundary_tolerance(*arrays: Any, tol: float | None = None) -> float:
    """
    Absolute tolerance for boundary-row residuals.

    - explicit `tol` wins
    - otherwise TAU_BC_REL times the largest sup norm among `arrays`
    """
    if tol is not None:
        return float(tol)
    scale = max((sup_norm(a) for a in arrays), default=0.0)
    return TAU_BC_REL * scale


def require_positive(name: str, value: float, allow_zero: bool = False) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value}")
    if allow_zero and value < 0.0:
        raise ParameterError(f"{name} must be >= 0, got {value}")
    if not allow_zero and value <= 0.0:
        raise ParameterError(f"{name} must be > 0, got {value}")
    return value


def one_sided_start(values: np.ndarray, step: float) -> np.ndarray:
    """Second-order forward difference at index 0 along axis 0."""
    return (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * step)


def one_sided_end(values: np.ndarray, step: float) -> np.ndarray:
    """Second-order backward difference at the last index along axis 0."""
    return (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * step)


# -------------------------
# Tables on disk
# -------------------------
def load_table(csv_path: Path, required: Sequence[str]) -> pd.DataFrame:
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"CSV not found: {csv_path}")

    # round_trip keeps 17-digit values bit-identical
    df = pd.read_csv(csv_path, float_precision="round_trip")

    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ParameterError(f"Missing required columns: {missing}. Found: {list(df.columns)}")
    return df


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_frame(df: pd.DataFrame, path: Path, fmt: str = "csv") -> Path:
    """Write a table atomically as CSV (17 significant digits) or JSON records."""
    path = Path(path)
    if fmt == "csv":
        _atomic_write_text(path, df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT))
    elif fmt == "json":
        records = [
            {k: _plain(v) for k, v in row.items()}
            for row in df.to_dict(orient="records")
        ]
        _atomic_write_text(path, json.dumps(records, indent=2) + "\n")
    else:
        raise ParameterError(f"Unknown output format: {fmt!r} (allowed: csv, json)")
    return path


def write_json(obj: Any, path: Path) -> Path:
    path = Path(path)
    _atomic_write_text(path, json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def strictly_decreasing(values: Iterable[float]) -> bool:
    arr = np.asarray(list(values), dtype=float)
    return bool(np.all(np.diff(arr) < 0.0))
