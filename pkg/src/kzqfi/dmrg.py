"""Two-site DMRG for the open transverse-field Ising chain."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import ConvergenceError, InvalidArgumentError
from .linalg import svd_truncated
from .model import J, ModelParams
from .mps import MPSState, random_mps

log = logging.getLogger(__name__)

_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
_ID = np.eye(2)

# effective problems up to this dimension are diagonalized densely
_DENSE_LIMIT = 512


@dataclass
class DMRGConfig:
    chi_max: int = 100
    svd_eps: float = 1e-12
    max_sweeps: int = 20
    energy_tol: float = 1e-10
    local_solver_tol: float = 1e-13
    init_chi: int = 8
    seed: int = 0

    def __post_init__(self):
        if int(self.chi_max) < 2:
            raise InvalidArgumentError(f"dmrg.chi_max must be >= 2, got {self.chi_max}")
        if not (self.energy_tol > 0 and self.local_solver_tol > 0 and self.svd_eps >= 0):
            raise InvalidArgumentError("DMRG tolerances must be positive")
        if int(self.max_sweeps) < 1:
            raise InvalidArgumentError("dmrg.max_sweeps must be >= 1")


@dataclass
class DMRGResult:
    state: MPSState
    energy: float
    sweep_energies: list = field(default_factory=list)
    truncation_error: float = 0.0


def tfim_mpo(N: int, g: float) -> list[np.ndarray]:
    """MPO tensors ``W[a, b, s_out, s_in]`` of H = -J sum sz sz - g sum sx."""
    W = np.zeros((3, 3, 2, 2))
    W[0, 0] = _ID
    W[1, 0] = _SZ
    W[2, 0] = -g * _SX
    W[2, 1] = -J * _SZ
    W[2, 2] = _ID
    if N == 1:
        return [W[2:3, 0:1]]
    return [W[2:3]] + [W] * (N - 2) + [W[:, 0:1]]


def grow_left(L, A, W):
    """Absorb one site into a left environment ``L[bra, mpo, ket]``."""
    T = np.tensordot(L, A, axes=(2, 0))  # (a, w, t, d)
    T = np.tensordot(T, W, axes=([1, 2], [0, 3]))  # (a, d, v, s)
    return np.tensordot(A.conj(), T, axes=([0, 1], [0, 3])).transpose(0, 2, 1)


def grow_right(R, A, W):
    # R[c, u, d] -> R'[a, w, b]
    T = np.tensordot(A, R, axes=(2, 2))  # (b, t, c, u)
    T = np.tensordot(T, W, axes=([1, 3], [3, 1]))  # (b, c, w, s)
    T = np.tensordot(A.conj(), T, axes=([1, 2], [3, 1]))  # (a, b, w)
    return T.transpose(0, 2, 1)


def _apply_heff(L, W1, W2, R, theta):
    T = np.tensordot(L, theta, axes=(2, 0))  # (a, w, t1, t2, d)
    T = np.tensordot(T, W1, axes=([1, 2], [0, 3]))  # (a, t2, d, v, s1)
    T = np.tensordot(T, W2, axes=([3, 1], [0, 3]))  # (a, d, s1, u, s2)
    T = np.tensordot(T, R, axes=([3, 1], [1, 2]))  # (a, s1, s2, c)
    return T


def _local_ground(L, W1, W2, R, theta0, tol):
    shape = theta0.shape
    dim = theta0.size

    def matvec(x):
        return _apply_heff(L, W1, W2, R, x.reshape(shape)).reshape(-1)

    if dim <= _DENSE_LIMIT:
        H = np.empty((dim, dim))
        eye = np.eye(dim)
        for j in range(dim):
            H[:, j] = matvec(eye[j])
        H = 0.5 * (H + H.T)
        w, v = np.linalg.eigh(H)
        return w[0], v[:, 0].reshape(shape)
    op = LinearOperator((dim, dim), matvec=matvec, dtype=float)
    w, v = eigsh(op, k=1, which="SA", v0=theta0.reshape(-1), tol=tol, ncv=min(dim, 24))
    return w[0], v[:, 0].reshape(shape)


def ground_state(params: ModelParams, g: float, cfg: DMRGConfig | None = None) -> DMRGResult:
    """Variational ground state of the open chain at transverse field ``g``.

    Starts from a seeded random MPS and sweeps until two consecutive sweep
    energies differ by less than ``cfg.energy_tol``.
    """
    cfg = cfg or DMRGConfig()
    N = params.N
    if N < 2:
        raise InvalidArgumentError(f"DMRG needs N >= 2, got {N}")
    Ws = tfim_mpo(N, g)
    chi = int(cfg.chi_max)
    psi = random_mps(N, min(cfg.init_chi, chi), seed=cfg.seed, real=True)
    A = [t.real.copy() for t in psi.tensors]  # right canonical, center 0

    Ls = [None] * N
    Rs = [None] * N
    Ls[0] = np.ones((1, 1, 1))
    Rs[N - 1] = np.ones((1, 1, 1))
    for i in range(N - 1, 0, -1):
        Rs[i - 1] = grow_right(Rs[i], A[i], Ws[i])

    energies = []
    trunc = 0.0
    e_prev = np.inf
    for sweep in range(int(cfg.max_sweeps)):
        e = None
        for i in range(N - 1):
            theta = np.tensordot(A[i], A[i + 1], axes=(2, 0))
            e, theta = _local_ground(Ls[i], Ws[i], Ws[i + 1], Rs[i + 1], theta, cfg.local_solver_tol)
            l, r = theta.shape[0], theta.shape[3]
            res = svd_truncated(theta.reshape(2 * l, 2 * r), chi, cfg.svd_eps)
            S = res.S / np.linalg.norm(res.S)
            A[i] = res.U.reshape(l, 2, -1)
            A[i + 1] = (S[:, None] * res.Vh).reshape(-1, 2, r)
            Ls[i + 1] = grow_left(Ls[i], A[i], Ws[i])
            trunc = max(trunc, res.discarded_weight)
        for i in range(N - 2, -1, -1):
            theta = np.tensordot(A[i], A[i + 1], axes=(2, 0))
            e, theta = _local_ground(Ls[i], Ws[i], Ws[i + 1], Rs[i + 1], theta, cfg.local_solver_tol)
            l, r = theta.shape[0], theta.shape[3]
            res = svd_truncated(theta.reshape(2 * l, 2 * r), chi, cfg.svd_eps)
            S = res.S / np.linalg.norm(res.S)
            A[i] = (res.U * S).reshape(l, 2, -1)
            A[i + 1] = res.Vh.reshape(-1, 2, r)
            Rs[i] = grow_right(Rs[i + 1], A[i + 1], Ws[i + 1])
            trunc = max(trunc, res.discarded_weight)
        energies.append(float(e))
        log.debug("DMRG sweep %d: E = %.15f, chi = %d", sweep, e, max(t.shape[2] for t in A))
        if sweep >= 1 and abs(e_prev - e) < cfg.energy_tol:
            state = MPSState(A, center=0).normalize()
            return DMRGResult(state, float(e), energies, trunc)
        e_prev = e
    raise ConvergenceError(
        f"DMRG did not converge in {cfg.max_sweeps} sweeps (last energies {energies[-3:]})", energies
    )
