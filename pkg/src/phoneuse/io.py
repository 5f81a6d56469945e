"""File formats: IMU sample CSV, label-interval sidecar, feature CSV.

All floats are written with ``repr`` (shortest round-trip form), so
outputs are byte-stable across runs and load back value-exact.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .features import N_FEATURES, FEATURE_NAMES, FeatureTable
from .synthgen import ImuStream

IMU_HEADER = "t,ax,ay,az,gx,gy,gz"
LABELS_HEADER = "start_t,end_t,label"
FEATURES_HEADER = "t," + ",".join(FEATURE_NAMES) + ",valid,label"


class DataFormatError(ValueError):
    """Malformed input file; the message carries the offending line number."""


def _fmt(x: float) -> str:
    return repr(float(x))


def write_imu_csv(path: str | Path, stream: ImuStream) -> None:
    with open(path, "w") as fh:
        fh.write(IMU_HEADER + "\n")
        for i in range(len(stream)):
            row = [stream.t[i], *stream.acc[i], *stream.gyr[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _parse_row(line: str, lineno: int, n_fields: int, path: str) -> list[float]:
    parts = line.split(",")
    if len(parts) != n_fields:
        raise DataFormatError(f"{path}:{lineno}: expected {n_fields} fields, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise DataFormatError(f"{path}:{lineno}: {exc}") from None


def read_imu_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Whole-file read; returns (t, acc(n,3), gyr(n,3))."""
    rows = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != IMU_HEADER:
            raise DataFormatError(f"{path}:1: expected header {IMU_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            rows.append(_parse_row(line, lineno, 7, str(path)))
    data = np.array(rows, dtype=float).reshape(-1, 7)
    return data[:, 0], data[:, 1:4], data[:, 4:7]


def read_imu_csv_chunks(path: str | Path,
                        chunk: int = 4096) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Stream the file in bounded-size chunks (for O(1)-memory pipelines)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != IMU_HEADER:
            raise DataFormatError(f"{path}:1: expected header {IMU_HEADER!r}")
        buf: list[list[float]] = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            buf.append(_parse_row(line, lineno, 7, str(path)))
            if len(buf) >= chunk:
                data = np.array(buf, dtype=float)
                yield data[:, 0], data[:, 1:4], data[:, 4:7]
                buf = []
        if buf:
            data = np.array(buf, dtype=float)
            yield data[:, 0], data[:, 1:4], data[:, 4:7]


def write_labels_csv(path: str | Path, intervals: list[tuple[float, float, int]]) -> None:
    with open(path, "w") as fh:
        fh.write(LABELS_HEADER + "\n")
        for start, end, label in intervals:
            fh.write(f"{_fmt(start)},{_fmt(end)},{int(label)}\n")


def read_labels_csv(path: str | Path) -> list[tuple[float, float, int]]:
    out = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != LABELS_HEADER:
            raise DataFormatError(f"{path}:1: expected header {LABELS_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            start, end, label = _parse_row(line, lineno, 3, str(path))
            if label not in (-1.0, 1.0):
                raise DataFormatError(f"{path}:{lineno}: label must be +1 or -1")
            if end <= start:
                raise DataFormatError(f"{path}:{lineno}: empty or reversed interval")
            out.append((start, end, int(label)))
    return out


def labels_to_track(intervals: list[tuple[float, float, int]], t: np.ndarray) -> np.ndarray:
    """Per-sample labels from [start, end) intervals; uncovered samples get 0."""
    track = np.zeros(len(t), dtype=int)
    for start, end, label in intervals:
        track[(t >= start) & (t < end)] = label
    return track


def write_features_csv(path: str | Path, table: FeatureTable) -> None:
    label = table.label if table.label is not None else np.zeros(len(table), dtype=int)
    with open(path, "w") as fh:
        fh.write(FEATURES_HEADER + "\n")
        for i in range(len(table)):
            cells = [_fmt(table.t[i])]
            cells += [_fmt(v) for v in table.x[i]]
            cells.append(str(int(table.valid[i])))
            cells.append(str(int(label[i])))
            fh.write(",".join(cells) + "\n")


def read_features_csv(path: str | Path) -> FeatureTable:
    rows = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if header != FEATURES_HEADER:
            raise DataFormatError(f"{path}:1: expected header {FEATURES_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            rows.append(_parse_row(line, lineno, N_FEATURES + 3, str(path)))
    data = np.array(rows, dtype=float).reshape(-1, N_FEATURES + 3)
    label = data[:, -1].astype(int)
    return FeatureTable(
        t=data[:, 0],
        x=data[:, 1:1 + N_FEATURES],
        valid=data[:, -2] != 0.0,
        label=label if (label != 0).any() else None,
    )
