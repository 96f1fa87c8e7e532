"""Matrix Pencil estimates and their algebraic equivalence with DMD.

Both methods start from the same truncated SVD of X.  The equivalence checks
therefore take decompositions that share those factors; an independently
recomputed SVD can differ by per-column phases and break exact comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dmd import (SVDFactors, SpectralDecomposition, _check_rank, eigendecompose, svd)
from .errors import NumericalError, ValidationError
from .hankel import DelayMatrixPair

COLLISION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PencilDecomposition:
    rank: int
    pencil_operator: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    right_gen_eigs: np.ndarray
    left_gen_eigs: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    sigma: np.ndarray


def pencil_decompose(pair: DelayMatrixPair, rank: int,
                     factors: Optional[SVDFactors] = None) -> PencilDecomposition:
    """``L = diag(s_r)^-1 U_r^* Y V_r`` and the generalized eigenvectors of (X, Y).

    Columns of ``right_gen_eigs`` are ``V_r W``; rows of ``left_gen_eigs`` are
    ``W^-1 diag(s_r)^-1 U_r^*``.
    """
    factors = factors if factors is not None else svd(pair.X)
    if factors.s[0] == 0:
        raise NumericalError("zero data")
    _check_rank(factors, rank)
    U = factors.U[:, :rank]
    V = factors.Vh[:rank].conj().T
    s = factors.s[:rank]
    L = (U.conj().T @ pair.Y @ V) / s[:, None]
    lam, W = eigendecompose(L)
    right = V @ W
    left = np.linalg.solve(W, U.conj().T / s[:, None])
    return PencilDecomposition(rank, L, lam, W, right, left, U, V, s)


def _same_factors(dmd_dec: SpectralDecomposition, pencil_dec: PencilDecomposition) -> None:
    if dmd_dec.rank != pencil_dec.rank:
        raise ValidationError(f"rank mismatch: {dmd_dec.rank} != {pencil_dec.rank}")
    if not (np.array_equal(dmd_dec.sigma, pencil_dec.sigma)
            and np.array_equal(dmd_dec.left_basis, pencil_dec.left_basis)
            and np.array_equal(dmd_dec.right_basis, pencil_dec.right_basis)):
        raise ValidationError("decompositions were not computed from the same SVD factors")


def verify_similarity(dmd_dec: SpectralDecomposition, pencil_dec: PencilDecomposition) -> float:
    """``|L - S^-1 K S|_F / max(1, |L|_F)`` with ``S = diag(sigma)``.

    With ``K = U^* Y V S^-1`` and ``L = S^-1 U^* Y V`` the similarity runs
    through ``S^-1 K S``; the reverse product ``S K S^-1`` equals ``L`` only
    when all retained singular values coincide.
    """
    _same_factors(dmd_dec, pencil_dec)
    s = dmd_dec.sigma
    L = pencil_dec.pencil_operator
    transformed = dmd_dec.reduced_operator * s[None, :] / s[:, None]
    return float(np.linalg.norm(L - transformed) / max(1.0, np.linalg.norm(L)))


def match_eigenvalues(a: np.ndarray, b: np.ndarray) -> tuple:
    """Optimal one-to-one matching; returns (index_a, index_b, max distance)."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValidationError("eigenvalue lists differ in length")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, float(cost[rows, cols].max(initial=0.0))


def eigenvalue_distance(a, b) -> float:
    """Max distance under the optimal matching of two eigenvalue multisets."""
    return match_eigenvalues(a, b)[2]


def _phase_aligned_difference(u: np.ndarray, v: np.ndarray) -> float:
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    inner = np.vdot(v, u)
    if abs(inner) > 0:
        v = v * (inner / abs(inner))
    return float(np.linalg.norm(u - v))


def verify_adjoint_mode_match(dmd_dec: SpectralDecomposition,
                              pencil_dec: PencilDecomposition) -> float:
    """Largest row difference between adjoint DMD modes and left generalized
    eigenvectors after pairing by eigenvalue and removing scale and phase."""
    _same_factors(dmd_dec, pencil_dec)
    for lam in (dmd_dec.eigenvalues, pencil_dec.eigenvalues):
        if lam.size > 1:
            gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(lam.size, np.inf))
            if gaps.min() < COLLISION_TOL:
                raise NumericalError("degenerate spectrum, match undefined")
    rows, cols, _ = match_eigenvalues(dmd_dec.eigenvalues, pencil_dec.eigenvalues)
    return max(
        _phase_aligned_difference(dmd_dec.adjoint_modes[i], pencil_dec.left_gen_eigs[j])
        for i, j in zip(rows, cols)
    )
