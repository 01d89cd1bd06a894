"""CSV/JSON/binary persistence for samples, solutions and experiment records."""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .fbm import CovarianceModel, GridSample

BATCH_HEADER = struct.Struct("<HHIQ")  # M, d, n, seed: 16 bytes


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_sample_csv(path, sample: GridSample) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t"] + [f"component_{c + 1}" for c in range(sample.dim)])
        for t, row in zip(sample.times, sample.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_sample_csv(path, model: CovarianceModel, seed: int, index: int = 0) -> GridSample:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    level = int(round(math.log2(data.shape[0] - 1)))
    if data.shape[0] != 2**level + 1:
        raise ValueError(f"{data.shape[0]} rows is not a dyadic grid")
    return GridSample(level, data[:, 1:], seed, model, index)


def write_batch(path, values: np.ndarray, M: int, seed: int) -> None:
    """Binary batch: 16-byte header {M, d, n, seed} then little-endian float64 values."""
    values = np.asarray(values, dtype="<f8")
    n, rows, d = values.shape
    if rows != 2**M + 1:
        raise ValueError(f"expected {2 ** M + 1} grid points, got {rows}")
    with open(path, "wb") as f:
        f.write(BATCH_HEADER.pack(M, d, n, seed))
        f.write(values.tobytes(order="C"))


def read_batch(path):
    """Returns (M, seed, values) with values shaped (n, 2^M+1, d)."""
    raw = Path(path).read_bytes()
    M, d, n, seed = BATCH_HEADER.unpack_from(raw)
    values = np.frombuffer(raw, dtype="<f8", offset=BATCH_HEADER.size)
    expected = n * (2**M + 1) * d
    if values.size != expected:
        raise ValueError(f"batch body holds {values.size} values, header promises {expected}")
    return M, seed, values.reshape(n, 2**M + 1, d).astype(float)


def write_solution_csv(path, times, states) -> None:
    states = np.asarray(states)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t"] + [f"x_{j + 1}" for j in range(states.shape[-1])])
        for t, row in zip(times, states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def records_to_csv(fieldnames, rows, stream) -> None:
    w = csv.DictWriter(stream, fieldnames=fieldnames)
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in fieldnames})


def write_records(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as f:
        records_to_csv(fieldnames, rows, f)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)  # JSON has no inf/nan literals
    return int(v) if isinstance(v, np.integer) else v


def write_records_json(path, fieldnames, rows) -> None:
    out = [{k: _json_value(r.get(k, "")) for k in fieldnames} for r in rows]
    Path(path).write_text(json.dumps(out, indent=1) + "\n")


def read_records(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
