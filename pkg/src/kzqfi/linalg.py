"""Dense complex linear algebra used by the tensor-network layer.

Tensors are plain ``numpy.ndarray`` objects in C (row-major) order.  A
two-site physical index pair ``(s1, s2)`` is always fused as ``2*s1 + s2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, InvalidInputError

# singular values below this fraction of the largest one are always dropped
RELATIVE_SV_CUTOFF = 1e-14


@dataclass
class SVDResult:
    U: np.ndarray
    S: np.ndarray
    Vh: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.S)


def _svd(M):
    try:
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge on ill-conditioned inputs
        return scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd", check_finite=False)


def svd_truncated(M: np.ndarray, chi_max: int, eps: float = 0.0) -> SVDResult:
    """Truncated SVD ``M ~= U @ diag(S) @ Vh``.

    Keeps the fewest singular values whose discarded relative weight
    ``sum(s_dropped**2) / sum(s**2)`` is at most ``eps``, but never more than
    ``chi_max`` and never any below ``RELATIVE_SV_CUTOFF * S[0]``.
    """
    M = np.asarray(M)
    if M.ndim != 2 or min(M.shape) < 1:
        raise InvalidArgumentError(f"svd_truncated expects a non-empty matrix, got shape {M.shape}")
    if chi_max is None or int(chi_max) < 1:
        raise InvalidArgumentError(f"chi_max must be a positive integer, got {chi_max!r}")
    if eps < 0:
        raise InvalidArgumentError(f"eps must be non-negative, got {eps}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("svd_truncated: matrix contains NaN or Inf")

    U, S, Vh = _svd(M)
    sq = S * S
    total = sq.sum()
    if total == 0.0:
        return SVDResult(U[:, :1], S[:1], Vh[:1, :], 0.0)

    n_keep = max(1, int(np.count_nonzero(S > RELATIVE_SV_CUTOFF * S[0])))
    # tail[i] = weight of singular values i, i+1, ... (relative)
    tail = np.cumsum(sq[::-1])[::-1] / total
    if eps > 0:
        # smallest k with tail[k] <= eps
        ok = np.nonzero(tail[1:n_keep] <= eps)[0]
        if len(ok):
            n_keep = int(ok[0]) + 1
    n_keep = min(n_keep, int(chi_max))
    discarded = float(tail[n_keep]) if n_keep < len(S) else 0.0
    return SVDResult(U[:, :n_keep], S[:n_keep], Vh[:n_keep, :], discarded)


def hermitian_expm(H: np.ndarray, scale: complex, tol: float = 1e-12) -> np.ndarray:
    """``exp(scale * H)`` for Hermitian ``H`` via its eigendecomposition."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidArgumentError(f"hermitian_expm expects a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise InvalidInputError("hermitian_expm: matrix contains NaN or Inf")
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(H), initial=0.0)):
        raise InvalidInputError("hermitian_expm: matrix is not Hermitian")
    w, V = np.linalg.eigh(H)
    return (V * np.exp(scale * w)) @ V.conj().T


def contract(A: np.ndarray, B: np.ndarray, axes) -> np.ndarray:
    """Contract ``A`` and ``B`` over the index pairs ``[(axis_of_A, axis_of_B), ...]``.

    The result carries the uncontracted axes of ``A`` in order, followed by
    those of ``B``.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    pairs = [tuple(p) for p in axes]
    for a, b in pairs:
        if not (-A.ndim <= a < A.ndim and -B.ndim <= b < B.ndim):
            raise InvalidArgumentError(f"axis pair {(a, b)} out of range for ranks {A.ndim}, {B.ndim}")
        if A.shape[a] != B.shape[b]:
            raise InvalidArgumentError(
                f"cannot contract axis {a} (dim {A.shape[a]}) with axis {b} (dim {B.shape[b]})"
            )
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    return np.tensordot(A, B, axes=(ax_a, ax_b))
