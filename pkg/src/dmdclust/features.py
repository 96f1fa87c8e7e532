"""Per-series spectral features from the ensemble matrix pencil.

The ensemble is arranged one row block per series (see
:func:`dmdclust.hankel.build_ensemble_by_series`).  The left eigenvectors of
the reduced operator, lifted by ``U^*``, give a matrix ``Q`` whose column
block ``i`` describes how strongly series ``i`` carries each eigenvalue.
Features are the moduli of those blocks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dmd
from .dmd import SVDFactors, TruncationPolicy
from .errors import NumericalError, ValidationError
from .hankel import ENSEMBLE_BY_SERIES, DelayMatrixPair, build_ensemble_by_series, \
    build_ensemble_by_time
from .matrix_pencil import match_eigenvalues, pencil_decompose
from .signal_model import SeriesEnsemble

MATCH_TOL = 1e-6
EIGVEC_RANK_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class FeatureModel:
    """Trained embedding ``W diag(s)^-1 V^*`` mapping a length-d series to features."""

    rank: int
    embed_operator: np.ndarray
    eigenvalues: np.ndarray
    n: int
    d: int

    def to_dict(self) -> dict:
        def pairs(a):
            return np.stack([a.real, a.imag], axis=-1).tolist()

        return {
            "rank": self.rank,
            "n": self.n,
            "d": self.d,
            "eigenvalues": pairs(self.eigenvalues),
            "embed_operator": pairs(self.embed_operator),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureModel":
        def complex_array(x):
            arr = np.asarray(x, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        op = complex_array(data["embed_operator"])
        lam = complex_array(data["eigenvalues"])
        rank, n, d = int(data["rank"]), int(data["n"]), int(data["d"])
        if op.shape != (rank, d) or lam.shape != (rank,):
            raise ValidationError("feature model arrays do not match rank/d")
        return cls(rank, op, lam, n, d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "FeatureModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """N nonnegative (rank, n) blocks stored as an (N, rank, n) array."""

    features: np.ndarray
    series_ids: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 3 or len(self.series_ids) != self.features.shape[0]:
            raise ValidationError("malformed feature set")

    def __len__(self) -> int:
        return self.features.shape[0]

    def flattened(self) -> np.ndarray:
        """Row-major flattening of each block, shape (N, rank * n)."""
        return self.features.reshape(len(self), -1)


def _row_normalize(A: np.ndarray) -> np.ndarray:
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    lead = A[np.arange(A.shape[0]), np.argmax(np.abs(A), axis=1)]
    return A * (np.abs(lead) / lead)[:, None]


def fit(pair: DelayMatrixPair, policy: TruncationPolicy,
        factors: Optional[SVDFactors] = None) -> tuple:
    """Train on an ensemble-by-series pair; returns ``(FeatureModel, Q)``.

    ``Q`` is (rank, nN) with unit-norm rows ordered like the eigenvalues.
    """
    if pair.arrangement != ENSEMBLE_BY_SERIES:
        raise ValidationError("features are defined on the ensemble_by_series arrangement")
    dec = dmd.decompose(pair, policy, factors)
    # adjoint modes are the left eigenvectors of K lifted by U^*; rescale rows
    scale = 1.0 / np.linalg.norm(dec.adjoint_modes, axis=1)
    Q = _row_normalize(dec.adjoint_modes * scale[:, None])
    W = Q @ dec.left_basis  # normalized left eigenvectors of K, Q = W U^*
    embed_op = (W / dec.sigma[None, :]) @ dec.right_basis.conj().T
    return FeatureModel(dec.rank, embed_op, dec.eigenvalues, pair.n, pair.d), Q


def extract(Q: np.ndarray, n: int, N: int, series_ids=None) -> FeatureSet:
    """Blocks ``q_i[j, k] = |Q[j, i*n + k]|`` (0-based)."""
    Q = np.asarray(Q)
    if Q.ndim != 2 or Q.shape[1] != n * N:
        raise ValidationError(f"Q has {Q.shape[-1]} columns, expected n*N = {n * N}")
    blocks = np.abs(Q).reshape(Q.shape[0], N, n).transpose(1, 0, 2)
    ids = np.arange(N) if series_ids is None else np.asarray(series_ids)
    return FeatureSet(np.ascontiguousarray(blocks), ids)


def distance(q_a, q_b) -> float:
    q_a, q_b = np.asarray(q_a), np.asarray(q_b)
    if q_a.shape != q_b.shape:
        raise ValidationError("feature blocks differ in shape")
    return float(np.linalg.norm(q_a - q_b))


def embed(model: FeatureModel, series) -> np.ndarray:
    """Feature block of a new series of exactly ``model.d`` samples."""
    y = np.asarray(series, dtype=complex)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != (model.d, model.n):
        raise ValidationError(f"series shape {y.shape} != ({model.d}, {model.n})")
    return np.abs(model.embed_operator @ y.conj())


def embed_many(model: FeatureModel, series) -> np.ndarray:
    """Vectorised :func:`embed` over an (M, d, n) stack."""
    y = np.asarray(series, dtype=complex)
    if y.ndim == 2:
        y = y[:, :, None]
    if y.shape[1:] != (model.d, model.n):
        raise ValidationError(f"series shape {y.shape[1:]} != ({model.d}, {model.n})")
    return np.abs(np.einsum("jt,mtk->mjk", model.embed_operator, y.conj()))


def nearest(q, features: FeatureSet, metric: Callable = distance) -> int:
    """Index of the training feature block closest to ``q`` under ``metric``."""
    dists = [metric(q, block) for block in features.features]
    return int(np.argmin(dists))


# ---------------------------------------------------------------------------
# numerical checks of the zero structure

@dataclass(frozen=True)
class ZeroStructureReport:
    max_off_support: float
    eigenvector_rank: int
    distinct_frequencies: int
    matched_distance: float


def _partition_frequencies(ensemble: SeriesEnsemble) -> tuple:
    if ensemble.models is None or ensemble.labels is None:
        raise ValidationError("ensemble needs ground-truth models and labels")
    parts = ensemble.partitions()
    part_freqs = {}
    for lab, idx in parts.items():
        freqs = np.concatenate([ensemble.models[i].frequencies for i in idx])
        part_freqs[lab] = _unique(freqs)
    distinct = _unique(np.concatenate(list(part_freqs.values())))
    return parts, part_freqs, distinct


def _unique(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    out = []
    for v in values:
        if not any(abs(v - u) <= tol for u in out):
            out.append(v)
    return np.array(out, dtype=complex)


def _exhibits(freqs: np.ndarray, lam: complex, tol: float = 1e-12) -> bool:
    return bool(np.any(np.abs(freqs - lam) <= tol))


def _coefficient_block(ensemble, idx, freqs) -> np.ndarray:
    """Rows: one per (series, component); columns: the partition's frequencies."""
    n = ensemble.n
    block = np.zeros((len(idx) * n, len(freqs)), dtype=complex)
    for r, i in enumerate(idx):
        model = ensemble.models[i]
        for c, lam in enumerate(freqs):
            hit = np.flatnonzero(np.abs(model.frequencies - lam) <= 1e-12)
            if hit.size:
                block[r * n:(r + 1) * n, c] = model.modes[hit].sum(axis=0)
    return block


def _premises(ensemble, d, parts, part_freqs, distinct, transpose: bool) -> None:
    total = sum(len(f) for f in part_freqs.values())
    if d < total or ensemble.length < d + 1 + int(transpose):
        raise ValidationError("zero-structure premises unmet")
    for lab, idx in parts.items():
        xi = _coefficient_block(ensemble, idx, part_freqs[lab])
        if np.linalg.matrix_rank(xi) != len(part_freqs[lab]):
            raise ValidationError("zero-structure premises unmet")


def _match(estimated, distinct, tol) -> tuple:
    rows, cols, dist = match_eigenvalues(estimated, distinct)
    if dist > tol:
        raise NumericalError(f"eigenvalues do not match generating frequencies ({dist:.3g})")
    order = np.argsort(rows)
    return distinct[cols[order]], dist


def zero_structure_report(ensemble: SeriesEnsemble, d: int,
                          match_tol: float = MATCH_TOL) -> ZeroStructureReport:
    """Off-support size of the unit-norm rows of ``Q`` on a partitioned ensemble.

    For each eigenvalue, series whose partition does not carry the matched
    generating frequency should have (numerically) zero entries.  Truncation
    uses the known count of distinct frequencies.
    """
    parts, part_freqs, distinct = _partition_frequencies(ensemble)
    _premises(ensemble, d, parts, part_freqs, distinct, transpose=False)
    pair = build_ensemble_by_series(ensemble, d)
    factors = dmd.svd(pair.X)
    l = distinct.size
    if ensemble.noise_sigma == 0 and dmd.numerical_rank(factors.s, 1e-10) != l:
        raise ValidationError("zero-structure premises unmet")
    model, Q = fit(pair, TruncationPolicy.fixed_rank(l), factors)
    matched, dist = _match(model.eigenvalues, distinct, match_tol)

    n = ensemble.n
    off = 0.0
    for row, lam in zip(Q, matched):
        for lab, idx in parts.items():
            if _exhibits(part_freqs[lab], lam):
                continue
            cols = (idx[:, None] * n + np.arange(n)[None, :]).ravel()
            off = max(off, float(np.abs(row[cols]).max(initial=0.0)))
    qs = np.linalg.svd(Q, compute_uv=False)
    eig_rank = int(np.count_nonzero(qs > EIGVEC_RANK_RTOL * qs[0]))
    return ZeroStructureReport(off, eig_rank, l, dist)


def verify_proposition_zero_structure(ensemble: SeriesEnsemble, d: int) -> float:
    """Max off-support feature entry after row normalisation (ensemble-by-series)."""
    return zero_structure_report(ensemble, d).max_off_support


def time_arrangement_report(ensemble: SeriesEnsemble, d: int,
                            match_tol: float = MATCH_TOL) -> ZeroStructureReport:
    """Same check on the one-column-per-series arrangement using the right
    generalized eigenvectors of the pencil (entry i belongs to series i).  n = 1 only."""
    if ensemble.n != 1:
        raise ValidationError("time-arrangement check is defined for n = 1")
    parts, part_freqs, distinct = _partition_frequencies(ensemble)
    _premises(ensemble, d, parts, part_freqs, distinct, transpose=True)
    pair = build_ensemble_by_time(ensemble, d)
    factors = dmd.svd(pair.X)
    l = distinct.size
    if ensemble.noise_sigma == 0 and dmd.numerical_rank(factors.s, 1e-10) != l:
        raise ValidationError("zero-structure premises unmet")
    dec = pencil_decompose(pair, l, factors)
    P = dec.right_gen_eigs / np.linalg.norm(dec.right_gen_eigs, axis=0, keepdims=True)
    matched, dist = _match(dec.eigenvalues, distinct, match_tol)
    off = 0.0
    for col, lam in enumerate(matched):
        for lab, idx in parts.items():
            if not _exhibits(part_freqs[lab], lam):
                off = max(off, float(np.abs(P[idx, col]).max(initial=0.0)))
    ps = np.linalg.svd(P, compute_uv=False)
    eig_rank = int(np.count_nonzero(ps > EIGVEC_RANK_RTOL * ps[0]))
    return ZeroStructureReport(off, eig_rank, l, dist)
