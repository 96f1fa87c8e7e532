"""File formats: ensemble/matrix/result CSVs, JSON results and 8-bit PGM images.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError
from .signal_model import GrainImage, SeriesEnsemble

ENSEMBLE_HEADER = ["series_id", "t", "dim", "re", "im"]


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _writer(path):
    f = open(path, "w", newline="")
    return f, csv.writer(f, lineterminator="\n")


# ---------------------------------------------------------------------------
# ensembles

def write_ensemble_csv(path, ensemble, series_ids=None) -> None:
    """One row per (series, t, component); components are numbered from 0."""
    data = ensemble.series if isinstance(ensemble, SeriesEnsemble) else np.asarray(ensemble)
    if data.ndim == 2:
        data = data[:, :, None]
    ids = range(data.shape[0]) if series_ids is None else series_ids
    f, w = _writer(path)
    with f:
        w.writerow(ENSEMBLE_HEADER)
        for sid, s in zip(ids, data):
            for t in range(s.shape[0]):
                for k in range(s.shape[1]):
                    v = complex(s[t, k])
                    w.writerow([sid, t, k, _num(v.real), _num(v.imag)])


def read_ensemble_csv(path) -> tuple:
    """Returns ``(series, series_ids)`` with series shaped (N, T+1, n).

    Series appear in order of first occurrence.  Every series must cover the
    same t = 0..T and dim = 0..n-1 grid exactly once.
    """
    values = {}
    order = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ENSEMBLE_HEADER:
            raise ValidationError(f"row 1: header must be {','.join(ENSEMBLE_HEADER)}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise ValidationError(f"row {row_no}: expected 5 fields, got {len(row)}")
            sid = row[0].strip()
            try:
                t, k = int(row[1]), int(row[2])
                v = complex(float(row[3]), float(row[4]))
            except ValueError:
                raise ValidationError(f"row {row_no}: malformed number") from None
            if t < 0 or k < 0:
                raise ValidationError(f"row {row_no}: negative index")
            if not np.isfinite(v):
                raise ValidationError(f"row {row_no}: non-finite value")
            if sid not in values:
                values[sid] = {}
                order.append(sid)
            if (t, k) in values[sid]:
                raise ValidationError(f"row {row_no}: duplicate sample ({sid}, {t}, {k})")
            values[sid][(t, k)] = (v, row_no)
    if not order:
        raise ValidationError("no data rows")
    T = max(t for s in values.values() for t, _ in s) + 1
    n = max(k for s in values.values() for _, k in s) + 1
    out = np.zeros((len(order), T, n), dtype=complex)
    for i, sid in enumerate(order):
        samples = values[sid]
        if len(samples) != T * n:
            last = max(r for _, r in samples.values())
            raise ValidationError(f"row {last}: series {sid} does not cover t=0..{T - 1}, "
                                  f"dim=0..{n - 1}")
        for (t, k), (v, _) in samples.items():
            out[i, t, k] = v
    return out, order


# ---------------------------------------------------------------------------
# matrices and vectors

def write_matrix_csv(path, M) -> None:
    """``# rows=R cols=C`` then ``row,col,re,im`` in column-major order."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    f, w = _writer(path)
    with f:
        f.write(f"# rows={M.shape[0]} cols={M.shape[1]}\n")
        w.writerow(["row", "col", "re", "im"])
        for c in range(M.shape[1]):
            for r in range(M.shape[0]):
                w.writerow([r, c, _num(M[r, c].real), _num(M[r, c].imag)])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as f:
        first = f.readline().strip()
        try:
            dims = dict(part.split("=") for part in first.lstrip("#").split())
            R, C = int(dims["rows"]), int(dims["cols"])
        except (ValueError, KeyError):
            raise ValidationError("row 1: expected '# rows=R cols=C'") from None
        reader = csv.reader(f)
        next(reader, None)
        M = np.zeros((R, C), dtype=complex)
        seen = 0
        for row_no, row in enumerate(reader, start=3):
            try:
                r, c = int(row[0]), int(row[1])
                M[r, c] = complex(float(row[2]), float(row[3]))
            except (ValueError, IndexError):
                raise ValidationError(f"row {row_no}: malformed matrix entry") from None
            seen += 1
    if seen != R * C:
        raise ValidationError(f"expected {R * C} entries, found {seen}")
    return M


def write_vector_csv(path, values, name: str = "value") -> None:
    """``index,<name>`` for real data, ``index,re,im`` for complex data."""
    values = np.asarray(values)
    f, w = _writer(path)
    with f:
        if np.iscomplexobj(values):
            w.writerow(["index", "re", "im"])
            for i, v in enumerate(values):
                w.writerow([i, _num(v.real), _num(v.imag)])
        else:
            w.writerow(["index", name])
            for i, v in enumerate(values):
                w.writerow([i, _num(v)])


def write_features_csv(path, features, series_ids=None) -> None:
    """Long format ``series_id,eigen_index,dim,value`` of (N, l, n) blocks."""
    F = np.asarray(features)
    ids = range(F.shape[0]) if series_ids is None else series_ids
    f, w = _writer(path)
    with f:
        w.writerow(["series_id", "eigen_index", "dim", "value"])
        for sid, block in zip(ids, F):
            for j in range(block.shape[0]):
                for k in range(block.shape[1]):
                    w.writerow([sid, j, k, _num(block[j, k])])


# ---------------------------------------------------------------------------
# clustering outputs

def write_dendrogram_csv(path, dendrogram) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["step", "cluster_a", "cluster_b", "cost", "new_size"])
        for step, (a, b, cost, size) in enumerate(dendrogram.merges):
            w.writerow([step, a, b, _num(cost), size])


def write_labels_csv(path, labels, item_ids=None) -> None:
    ids = range(len(labels)) if item_ids is None else item_ids
    f, w = _writer(path)
    with f:
        w.writerow(["item_id", "label"])
        for item, lab in zip(ids, labels):
            w.writerow([item, int(lab)])


def write_label_map_csv(path, label_image) -> None:
    """Every pixel as ``i,j,label`` (i column, j row), row-major; border label 0."""
    L = np.asarray(label_image)
    f, w = _writer(path)
    with f:
        w.writerow(["i", "j", "label"])
        for j in range(L.shape[0]):
            for i in range(L.shape[1]):
                w.writerow([i, j, int(L[j, i])])


# ---------------------------------------------------------------------------
# images

def read_pgm(path) -> GrainImage:
    """8-bit binary PGM; brightness mapped linearly to [0, 1]."""
    try:
        with open(path, "rb") as f:
            magic = f.read(2)
        if magic != b"P5":
            raise ValidationError(f"{path}: not a binary PGM (P5) file")
        with Image.open(path) as im:
            if im.mode != "L":
                raise ValidationError(f"{path}: expected 8-bit grayscale, got mode {im.mode}")
            pixels = np.asarray(im, dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"{path}: unreadable image ({exc})") from None
    return GrainImage(pixels)


def to_bytes(values) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    return np.rint(v * 255.0).astype(np.uint8)


def write_pgm(path, values) -> None:
    """Values in [0, 1] (clipped) written as 8-bit binary PGM."""
    Image.fromarray(to_bytes(values), mode="L").save(path, format="PPM")


# ---------------------------------------------------------------------------
# JSON

def complex_list(values) -> list:
    return [{"re": float(v.real), "im": float(v.imag)} for v in np.asarray(values).ravel()]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")
