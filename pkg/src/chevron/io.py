"""Output files: diagnostics CSV, field snapshots and the run manifest.

Floats are written with 17 significant digits, which round-trips every
binary64 value exactly, so snapshots read back bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .model import State1D

__all__ = [
    "FLOAT_FORMAT",
    "DiagnosticsWriter",
    "read_diagnostics",
    "write_snapshot",
    "read_snapshot",
    "snapshot_name",
    "write_manifest",
    "sha256_file",
]

FLOAT_FORMAT = "%.17g"
SNAPSHOT_COLUMNS = ("x", "re_a", "im_a", "abs_a", "phi")
_HEADER = re.compile(r"#\s*step=(\d+)\s+time=(\S+)\s*$")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FORMAT % float(value)


class DiagnosticsWriter:
    """Comma-separated diagnostics with a header row, flushed per row so a
    failed run leaves everything written up to the failure."""

    def __init__(self, path: Path, columns: Sequence[str]):
        self.path = Path(path)
        self.columns = list(columns)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def write(self, row: Mapping[str, object]) -> None:
        self._fh.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path: Path) -> List[dict]:
    """Rows of a diagnostics file as dicts of floats."""
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def snapshot_name(step: int) -> str:
    return f"snapshot_{step:08d}.csv"


def write_snapshot(path: Path, state: State1D, dx: float) -> None:
    """One row per node: ``x, re(A), im(A), |A|, phi``, after a
    ``# step=K time=T`` line and a header."""
    x = np.arange(state.n + 1) * dx
    table = np.column_stack([x, state.a.real, state.a.imag, np.abs(state.a), state.phi])
    with open(path, "w", newline="") as fh:
        fh.write(f"# step={state.step} time={FLOAT_FORMAT % state.time}\n")
        fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
        for row in table:
            fh.write(",".join(FLOAT_FORMAT % v for v in row) + "\n")


def read_snapshot(path: Path) -> State1D:
    """Inverse of :func:`write_snapshot`.

    Raises
    ------
    ConfigError
        If the file is missing or malformed; the message names the line.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"snapshot file not found: {path}")
    step, time = 0, 0.0
    re_a, im_a, phi = [], [], []
    header_seen = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                m = _HEADER.match(text)
                if m is None:
                    raise ConfigError(f"{path}:{lineno}: bad comment line {text!r}")
                step, time = int(m.group(1)), float(m.group(2))
                continue
            if not header_seen:
                if tuple(c.strip() for c in text.split(",")) != SNAPSHOT_COLUMNS:
                    raise ConfigError(f"{path}:{lineno}: expected header {','.join(SNAPSHOT_COLUMNS)}")
                header_seen = True
                continue
            parts = text.split(",")
            if len(parts) != len(SNAPSHOT_COLUMNS):
                raise ConfigError(f"{path}:{lineno}: expected {len(SNAPSHOT_COLUMNS)} values, got {len(parts)}")
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value in {text!r}") from None
            re_a.append(values[1])
            im_a.append(values[2])
            phi.append(values[4])
    if not header_seen or not re_a:
        raise ConfigError(f"{path}: no data rows")
    try:
        return State1D(np.array(re_a) + 1j * np.array(im_a), np.array(phi), time=time, step=step)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def write_manifest(path: Path, payload: dict, outputs: Optional[Iterable[Path]] = None) -> dict:
    """Write ``payload`` plus sha256 checksums of ``outputs`` as sorted JSON.

    Returns the dict written. No timestamps go in, so identical runs give
    identical manifests.
    """
    data = dict(payload)
    if outputs is not None:
        data["checksums"] = {Path(p).name: sha256_file(p) for p in sorted(outputs, key=lambda p: Path(p).name)}
    data = _jsonable(data)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data
