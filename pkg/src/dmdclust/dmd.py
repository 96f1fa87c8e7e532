"""Dynamic mode decomposition on delay-embedded data.

The pipeline is truncated SVD -> reduced operator -> eigendecomposition ->
mode lift -> averaged scalings -> per-term coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .errors import NumericalError, ValidationError
from .hankel import DelayMatrixPair

NUMERICAL_RANK_RTOL = 1e-14
GAP_FLOOR = 1e-12
DEFECTIVE_COND = 1e12
ZERO_EIGENVALUE = 1e-12
MAGNITUDE_TIE_RTOL = 1e-9


class SVDFactors(NamedTuple):
    """Thin SVD ``X = U @ diag(s) @ Vh``."""

    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray


def svd(X: np.ndarray) -> SVDFactors:
    if X.size == 0:
        raise ValidationError("empty data matrix")
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    return SVDFactors(U, s, Vh)


@dataclass(frozen=True)
class TruncationPolicy:
    """How many singular directions to keep.

    Use the constructors: ``fixed_rank(r)``, ``energy(tau)`` or ``gap(floor)``.
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind == "fixed_rank":
            if int(self.value) != self.value or self.value < 1:
                raise ValidationError("fixed rank must be a positive integer")
        elif self.kind in ("energy", "gap"):
            if not 0.0 < self.value < 1.0:
                raise ValidationError(f"{self.kind} threshold must lie in (0, 1)")
        else:
            raise ValidationError(f"unknown truncation policy {self.kind!r}")

    @classmethod
    def fixed_rank(cls, rank: int) -> "TruncationPolicy":
        return cls("fixed_rank", rank)

    @classmethod
    def energy(cls, tau: float) -> "TruncationPolicy":
        return cls("energy", tau)

    @classmethod
    def gap(cls, floor: float = GAP_FLOOR) -> "TruncationPolicy":
        return cls("gap", floor)


def select_rank(singular_values, policy: TruncationPolicy) -> int:
    """Truncation rank for a nonincreasing list of singular values.

    ``gap`` picks the r maximising s[r-1]/s[r] among indices whose relative
    size s[r-1]/s[0] exceeds the policy floor.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValidationError("singular values must be a nonempty list")
    if np.any(s < 0) or np.any(np.diff(s) > 0):
        raise ValidationError("singular values must be nonnegative and nonincreasing")
    if s[0] == 0:
        raise NumericalError("zero data")

    if policy.kind == "fixed_rank":
        return int(min(policy.value, np.count_nonzero(s > 0)))
    if policy.kind == "energy":
        cum = np.cumsum(s**2)
        return int(np.searchsorted(cum, policy.value * cum[-1]) + 1)
    # gap
    if s.size == 1:
        return 1
    head = s[:-1]
    eligible = head / s[0] > policy.value
    with np.errstate(divide="ignore"):
        ratios = np.where(s[1:] > 0, head / np.where(s[1:] > 0, s[1:], 1.0), np.inf)
    ratios = np.where(eligible, ratios, -np.inf)
    return int(np.argmax(ratios) + 1)


def numerical_rank(s: np.ndarray, rtol: float = NUMERICAL_RANK_RTOL) -> int:
    s = np.asarray(s)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def canonical_order(eigenvalues: np.ndarray) -> np.ndarray:
    """Permutation sorting by descending modulus, ties by ascending phase in (-pi, pi].

    Moduli within a relative 1e-9 of the previous one count as tied, so
    conjugate pairs of real data come out in a stable order.
    """
    lam = np.asarray(eigenvalues)
    mags = np.abs(lam)
    phases = np.angle(lam)
    phases = np.where(phases <= -np.pi, np.pi, phases)
    by_mag = np.argsort(-mags, kind="stable")
    groups = np.zeros(lam.size, dtype=int)
    g = 0
    for pos in range(1, lam.size):
        prev, cur = mags[by_mag[pos - 1]], mags[by_mag[pos]]
        if prev - cur > MAGNITUDE_TIE_RTOL * max(prev, 1e-300):
            g += 1
        groups[pos] = g
    keys = np.lexsort((phases[by_mag], groups))
    return by_mag[keys]


def normalize_columns(V: np.ndarray) -> np.ndarray:
    """Unit-norm columns, each rotated so its first nonzero entry is real positive."""
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    mags = np.abs(V)
    first = np.argmax(mags > 1e-8 * mags.max(axis=0, keepdims=True), axis=0)
    lead = V[first, np.arange(V.shape[1])]
    return V * (np.abs(lead) / lead)[None, :]


def eigendecompose(K: np.ndarray) -> tuple:
    """Eigenvalues and normalised right eigenvectors in canonical order.

    Raises :class:`NumericalError` when the eigenvector matrix is numerically
    singular (condition number above 1e12).
    """
    lam, V = np.linalg.eig(K)
    order = canonical_order(lam)
    lam, V = lam[order], normalize_columns(V[:, order])
    if not np.all(np.isfinite(V)) or np.linalg.cond(V) > DEFECTIVE_COND:
        raise NumericalError("defective reduced operator")
    return lam, V


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    rank: int
    singular_values: np.ndarray
    reduced_operator: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    sigma: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    eigenvectors: Optional[np.ndarray] = None
    modes: Optional[np.ndarray] = None
    adjoint_modes: Optional[np.ndarray] = None

    def lifted_operator(self) -> np.ndarray:
        """Rank-limited full-order map ``U K U^*``."""
        U = self.left_basis
        return U @ self.reduced_operator @ U.conj().T


@dataclass(frozen=True, eq=False)
class ScaledModes:
    scalings: np.ndarray
    coefficients: Optional[np.ndarray] = None


def _check_rank(factors: SVDFactors, rank: int) -> None:
    if rank < 1:
        raise ValidationError("rank must be at least 1")
    if rank > factors.s.size:
        raise ValidationError("rank exceeds the data matrix dimensions")
    if rank > numerical_rank(factors.s):
        raise NumericalError("truncation beyond numerical rank")


def reduced_operator(pair: DelayMatrixPair, rank: int,
                     factors: Optional[SVDFactors] = None) -> SpectralDecomposition:
    """``K = U_r^* Y V_r diag(s_r)^-1`` with the SVD of ``pair.X`` truncated to ``rank``."""
    factors = factors if factors is not None else svd(pair.X)
    if factors.s[0] == 0:
        raise NumericalError("zero data")
    _check_rank(factors, rank)
    U = factors.U[:, :rank]
    V = factors.Vh[:rank].conj().T
    s = factors.s[:rank]
    K = (U.conj().T @ pair.Y @ V) / s[None, :]
    return SpectralDecomposition(rank, factors.s.copy(), K, U, V, s)


def decompose(pair: DelayMatrixPair, policy: TruncationPolicy,
              factors: Optional[SVDFactors] = None) -> SpectralDecomposition:
    factors = factors if factors is not None else svd(pair.X)
    rank = select_rank(factors.s, policy)
    partial = reduced_operator(pair, rank, factors)
    lam, Vt = eigendecompose(partial.reduced_operator)
    U = partial.left_basis
    return replace(
        partial,
        eigenvalues=lam,
        eigenvectors=Vt,
        modes=U @ Vt,
        adjoint_modes=np.linalg.solve(Vt, U.conj().T),
    )


def _inverse_powers(lam: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    exponents = np.asarray(exponents)
    small = np.abs(lam) < ZERO_EIGENVALUE
    if np.any(small) and np.any(exponents > 0):
        raise NumericalError("zero eigenvalue cannot be inverted")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lam[None, :] ** (-exponents[:, None].astype(float))
    # lambda**0 is 1 even for lambda == 0
    out[exponents == 0, :] = 1.0
    return out


def scale_modes(dec: SpectralDecomposition, snapshots: np.ndarray, times) -> ScaledModes:
    """Average of ``(adjoint_modes @ z(tau))_j * lambda_j**-tau`` over the snapshots."""
    Z = np.asarray(snapshots, dtype=complex)
    if Z.ndim == 1:
        Z = Z[:, None]
    times = np.atleast_1d(np.asarray(times))
    if Z.shape[1] == 0 or Z.shape[1] != times.size:
        raise ValidationError("need one time index per snapshot column")
    proj = dec.adjoint_modes @ Z  # (rank, M)
    weights = _inverse_powers(dec.eigenvalues, times)  # (M, rank)
    c = np.mean(proj.T * weights, axis=0)
    return ScaledModes(c)


def recover_coefficients(dec: SpectralDecomposition, scaled: ScaledModes, n: int,
                         d: int) -> np.ndarray:
    """Per-term vectors ``v_j`` (rows of an (rank, n) array) from the scaled modes."""
    if dec.modes.shape[0] != (d + 1) * n:
        raise ValidationError("mode length must equal (d+1)*n")
    scaled_modes = dec.modes * scaled.scalings[None, :]  # ((d+1)n, rank)
    blocks = scaled_modes.reshape(d + 1, n, dec.rank)
    weights = _inverse_powers(dec.eigenvalues, np.arange(d + 1))  # (d+1, rank)
    return np.einsum("knj,kj->jn", blocks, weights) / (d + 1)


def reconstruct(dec: SpectralDecomposition, scaled: ScaledModes, t) -> np.ndarray:
    """``sum_j c_j w_j lambda_j**t``; vector for scalar t, columns for an array of t."""
    t_arr = np.asarray(t)
    powers = dec.eigenvalues[:, None] ** np.atleast_1d(t_arr)[None, :]
    Z = (dec.modes * scaled.scalings[None, :]) @ powers
    return Z[:, 0] if t_arr.ndim == 0 else Z


@dataclass(frozen=True, eq=False)
class SeriesFit:
    pair: DelayMatrixPair
    decomposition: SpectralDecomposition
    scaled: ScaledModes
    reconstruction_error: float


def single_series_fit(series, d: int, policy: TruncationPolicy,
                      factors: Optional[SVDFactors] = None) -> SeriesFit:
    """Decompose one sequence end to end, including coefficients and the
    relative reconstruction error over every observed delayed observable."""
    from .hankel import build_single_series

    pair = build_single_series(series, d)
    dec = decompose(pair, policy, factors)
    M = pair.X.shape[1]
    Z = np.concatenate([pair.X, pair.Y[:, -1:]], axis=1)
    scaled = scale_modes(dec, pair.X, np.arange(M))
    coeffs = recover_coefficients(dec, scaled, pair.n, d)
    scaled = ScaledModes(scaled.scalings, coeffs)
    Zhat = reconstruct(dec, scaled, np.arange(M + 1))
    err = np.linalg.norm(Zhat - Z) / max(np.linalg.norm(Z), np.finfo(float).tiny)
    return SeriesFit(pair, dec, scaled, float(err))
