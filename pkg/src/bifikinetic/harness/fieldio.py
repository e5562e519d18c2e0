"""CSV and JSON persistence.

Floats are written with ``repr``, the shortest decimal string that reads
back to the same binary64 value, so files are bit-stable across runs.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from ..errors import SampleMismatch
from ..phase_space import MacroField
from ..scenarios import ParameterSample

FIELD_COLUMNS = ("x", "rho", "u1", "u2", "T")


def _fmt(v) -> str:
    return repr(float(v))


def write_field_csv(path, x, W: MacroField) -> Path:
    path = Path(path)
    prim = W.primitive()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_COLUMNS)
        for xi, row in zip(x, prim):
            w.writerow([_fmt(xi)] + [_fmt(v) for v in row])
    return path


def write_profile_csv(path, x, fields: dict) -> Path:
    """Columns x followed by the given named arrays, in insertion order."""
    path = Path(path)
    names = list(fields)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x"] + names)
        for i, xi in enumerate(x):
            w.writerow([_fmt(xi)] + [_fmt(fields[n][i]) for n in names])
    return path


def read_field_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in rows[0]}


def write_samples_csv(path, samples) -> Path:
    path = Path(path)
    samples = list(samples)
    d = samples[0].dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"z{i + 1}" for i in range(d)])
        for s in samples:
            w.writerow([s.id] + [_fmt(v) for v in s.z])
    return path


def read_samples_csv(path, dim: int | None = None) -> list:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [r for r in reader if r]
    except (OSError, StopIteration) as exc:
        raise SampleMismatch(f"cannot read samples from {path}: {exc}") from exc
    if not header or header[0] != "id":
        raise SampleMismatch("samples file must start with an 'id' column")
    width = len(header) - 1
    if dim is not None and width != dim:
        raise SampleMismatch(f"samples have {width} parameters, scenario expects {dim}")
    out, seen = [], set()
    for r in rows:
        if len(r) != width + 1:
            raise SampleMismatch(f"row for {r[0]!r} has {len(r) - 1} values, expected {width}")
        if r[0] in seen:
            raise SampleMismatch(f"duplicate sample id {r[0]!r}")
        seen.add(r[0])
        try:
            z = tuple(float(v) for v in r[1:])
        except ValueError as exc:
            raise SampleMismatch(f"bad value in sample {r[0]!r}: {exc}") from exc
        if any(abs(v) > 1.0 for v in z):
            raise SampleMismatch(f"sample {r[0]!r} leaves [-1, 1]")
        out.append(ParameterSample(r[0], z))
    return out


def write_matrix_csv(path, ids, matrix) -> Path:
    """One row per id: id followed by the row of ``matrix``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, row in zip(ids, np.atleast_2d(matrix)):
            w.writerow([i] + [_fmt(v) for v in row])
    return path


def read_matrix_csv(path):
    ids, rows = [], []
    with open(path, newline="") as fh:
        for r in csv.reader(fh):
            if r:
                ids.append(r[0])
                rows.append([float(v) for v in r[1:]])
    return ids, np.array(rows)


def write_table_csv(path, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, (str, int)) else _fmt(v) for v in row])
    return path


def write_json(path, data) -> Path:
    """Write atomically: temp file then rename."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def inventory(root, paths) -> dict:
    root = Path(root)
    return {str(Path(p).relative_to(root)): sha256_file(p) for p in sorted(paths)}
