"""Dense symmetric linear algebra used by every estimator.

Eigendecompositions return eigenvalues in descending order. Positive
definiteness is checked against a relative floor of ``EIG_FLOOR`` times the
largest eigenvalue; anything below the floor raises rather than being
silently regularized.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInput, RankDeficient, SingularCovariance

EIG_FLOOR = 1e-10
RANK_TOL = 1e-10


@dataclass(frozen=True)
class GedResult:
    """Top-k generalized eigenpairs of a symmetric-definite pencil (M, Sigma).

    ``vectors`` is p x k and satisfies ``vectors.T @ Sigma @ vectors = I``.
    ``spectrum`` holds every generalized eigenvalue, descending.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    spectrum: np.ndarray


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput(f"{name} must be a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(w, Q)`` with ``A = Q @ diag(w) @ Q.T``.
    """
    A = _as_square(A)
    w, Q = np.linalg.eigh(symmetrize(A))
    order = np.argsort(-w, kind="stable")
    return w[order], Q[:, order]


def _check_pd(w, name):
    top = w[0]
    if top <= 0 or w[-1] <= EIG_FLOOR * top:
        raise SingularCovariance(
            f"{name} is not positive definite (eigenvalues in [{w[-1]:.3g}, {top:.3g}])"
        )


def inv_sqrt(A):
    """Symmetric inverse square root ``R`` with ``R @ A @ R = I``."""
    w, Q = sym_eig(A)
    _check_pd(w, "matrix")
    return (Q / np.sqrt(w)) @ Q.T


def gen_eig(M, Sigma, k):
    """Top-k solutions of ``M v = lam Sigma v`` for symmetric M and pd Sigma."""
    M = _as_square(M, "M")
    Sigma = _as_square(Sigma, "Sigma")
    p = M.shape[0]
    if Sigma.shape != M.shape:
        raise InvalidInput("M and Sigma must have the same shape")
    if not 1 <= k <= p:
        raise InvalidInput(f"k must lie in [1, {p}], got {k}")
    _check_pd(np.linalg.eigvalsh(symmetrize(Sigma))[::-1], "Sigma")
    w, V = scipy.linalg.eigh(symmetrize(M), symmetrize(Sigma))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    return GedResult(eigenvalues=w[:k].copy(), vectors=V[:, :k].copy(), spectrum=w)


def _orthonormal_basis(B, name):
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if not np.all(np.isfinite(B)):
        raise InvalidInput(f"{name} has non-finite entries")
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise RankDeficient(f"{name} is the zero matrix")
    rank = int(np.sum(s > RANK_TOL * s[0]))
    if rank < B.shape[1]:
        raise RankDeficient(f"{name} has rank {rank} < {B.shape[1]} columns")
    return U[:, :rank]


def sigma_normalize(B, Sigma):
    """Rescale ``B`` to ``B (B' Sigma B)^{-1/2}``."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    return B @ inv_sqrt(B.T @ Sigma @ B)


def gram_normalize(B):
    """Rescale ``B`` to ``B (B'B)^{-1/2}`` so its columns are orthonormal."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    return B @ inv_sqrt(B.T @ B)


def projection_loss(B1, B2, Sigma=None):
    """Squared Frobenius distance between the column-space projectors.

    When ``Sigma`` is given, ``B1`` is first normalized as
    ``B1 (B1' Sigma B1)^{-1/2}``. That rescaling leaves the column span (and
    so the loss) unchanged, but it is applied for parity with how estimates
    are reported.
    """
    if Sigma is not None:
        B1 = sigma_normalize(B1, Sigma)
    Q1 = _orthonormal_basis(B1, "B1")
    Q2 = _orthonormal_basis(B2, "B2")
    if Q1.shape[0] != Q2.shape[0]:
        raise InvalidInput("B1 and B2 must have the same number of rows")
    cross = np.linalg.norm(Q1.T @ Q2) ** 2
    return max(Q1.shape[1] + Q2.shape[1] - 2.0 * cross, 0.0)


def projection_distance(B1, B2, Sigma=None):
    """Unsquared projector distance, the quantity tabulated in simulation reports."""
    return float(np.sqrt(projection_loss(B1, B2, Sigma)))


def subspace_dist(X, Y):
    """Orthogonal Procrustes distance ``min_H ||X H - Y||_F`` over orthogonal H."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape != Y.shape:
        raise InvalidInput(f"shape mismatch: {X.shape} vs {Y.shape}")
    U, _, Vt = np.linalg.svd(X.T @ Y)
    return float(np.linalg.norm(X @ (U @ Vt) - Y))
