"""Shifted data-matrix pairs built from sequences (delay / Hankel arrangements)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .signal_model import SeriesEnsemble

SINGLE_SERIES = "single_series"
SNAPSHOTS = "snapshots"
ENSEMBLE_BY_TIME = "ensemble_by_time"
ENSEMBLE_BY_SERIES = "ensemble_by_series"
ARRANGEMENTS = (SINGLE_SERIES, SNAPSHOTS, ENSEMBLE_BY_TIME, ENSEMBLE_BY_SERIES)


@dataclass(frozen=True, eq=False)
class DelayMatrixPair:
    X: np.ndarray
    Y: np.ndarray
    arrangement: str
    n: int
    d: int = 0
    series_count: Optional[int] = None

    def __post_init__(self):
        if self.X.shape != self.Y.shape:
            raise ValidationError(f"X {self.X.shape} and Y {self.Y.shape} differ in shape")
        if self.arrangement not in ARRANGEMENTS:
            raise ValidationError(f"unknown arrangement {self.arrangement!r}")

    @property
    def shape(self) -> tuple:
        return self.X.shape


def _as_series(series) -> np.ndarray:
    arr = np.asarray(series, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValidationError("series must be a sequence of scalars or vectors")
    return arr


def delayed_observables(series, d: int) -> np.ndarray:
    """Columns ``z(t)`` stacking ``y(t), ..., y(t+d)`` for every admissible t.

    Result has shape ((d+1)n, T+1-d).
    """
    y = _as_series(series)
    length, n = y.shape
    if d < 0 or length < d + 1:
        raise ValidationError(f"need at least d+1 = {d + 1} samples")
    windows = np.lib.stride_tricks.sliding_window_view(y, d + 1, axis=0)  # (L-d, n, d+1)
    return windows.transpose(2, 1, 0).reshape((d + 1) * n, length - d)


def build_single_series(series, d: int) -> DelayMatrixPair:
    """Delay matrices of one sequence: X columns z(0..T-d-1), Y columns z(1..T-d)."""
    y = _as_series(series)
    if d < 0:
        raise ValidationError("d must be nonnegative")
    if y.shape[0] < d + 2:
        raise ValidationError("need at least d+2 samples")
    Z = delayed_observables(y, d)
    return DelayMatrixPair(Z[:, :-1].copy(), Z[:, 1:].copy(), SINGLE_SERIES, y.shape[1], d)


def build_snapshots(pairs) -> DelayMatrixPair:
    """Stack arbitrary (z(t), z(t+1)) pairs as columns, in the given order."""
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("no snapshot pairs given")
    firsts = [np.atleast_1d(np.asarray(a, dtype=complex)) for a, _ in pairs]
    seconds = [np.atleast_1d(np.asarray(b, dtype=complex)) for _, b in pairs]
    dims = {v.shape for v in firsts + seconds}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValidationError("snapshot pairs have mixed dimensions")
    X = np.stack(firsts, axis=1)
    Y = np.stack(seconds, axis=1)
    return DelayMatrixPair(X, Y, SNAPSHOTS, X.shape[0])


def _ensemble_array(ensemble) -> np.ndarray:
    if isinstance(ensemble, SeriesEnsemble):
        return ensemble.series
    try:
        arr = np.asarray(ensemble, dtype=complex)
    except (ValueError, TypeError) as exc:
        raise ValidationError("ragged ensemble") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValidationError("ragged ensemble")
    return arr


def build_ensemble_by_time(ensemble, d: int) -> DelayMatrixPair:
    """One column per series: X stacks y_i(0..d), Y stacks y_i(1..d+1); shape ((d+1)n, N)."""
    arr = _ensemble_array(ensemble)
    N, length, n = arr.shape
    if d < 0 or length < d + 2:
        raise ValidationError(f"every series needs at least d+2 = {d + 2} samples")
    # (N, d+1, n) -> ((d+1) n, N), delay-major then component
    X = arr[:, : d + 1, :].reshape(N, (d + 1) * n).T
    Y = arr[:, 1 : d + 2, :].reshape(N, (d + 1) * n).T
    return DelayMatrixPair(X.copy(), Y.copy(), ENSEMBLE_BY_TIME, n, d, N)


def build_ensemble_by_series(ensemble, d: int) -> DelayMatrixPair:
    """One row block per series: X rows y_i(0..d-1), Y rows y_i(1..d); shape (nN, d).

    Row ``i*n + k`` holds component ``k`` of series ``i``.  Exactly d+1 samples
    per series are consumed; longer series are truncated.
    """
    arr = _ensemble_array(ensemble)
    N, length, n = arr.shape
    if d < 1 or length < d + 1:
        raise ValidationError(f"every series needs at least d+1 = {d + 1} samples")
    X = arr[:, :d, :].transpose(0, 2, 1).reshape(N * n, d)
    Y = arr[:, 1 : d + 1, :].transpose(0, 2, 1).reshape(N * n, d)
    return DelayMatrixPair(X.copy(), Y.copy(), ENSEMBLE_BY_SERIES, n, d, N)
