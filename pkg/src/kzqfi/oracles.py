"""Independent reference engines.

Free fermions
    Each momentum pair of the periodic chain evolves as a two-level system,
        i d/dt (u_k, v_k) = 2 [[g - cos k, sin k], [sin k, cos k - g]] (u_k, v_k),
    integrated with an adaptive 8th-order Runge-Kutta scheme.  The factor 2 is
    the quasiparticle energy scale of H = -sum sz sz - g sum sx; it is what
    makes the Landau-Zener exponent come out as 2 pi tau_q k^2.

Dense state vector
    Exact 2^N amplitudes (N <= 12) pushed through the same gate layers the MPS
    engine consumes, plus exact diagonalization for ground states.

Gaussian circuit
    Every bond gate is the exponential of a quadratic form in the Majorana
    operators a_2j = X_<j sz_j, a_2j+1 = X_<j sy_j, so the same gate layers act
    on the 2N x 2N covariance M_mn = i<a_m a_n> as orthogonal rotations.  This
    reaches any N; sz-sz correlators are Pfaffians of covariance blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import eigsh

from .errors import CapacityError, InvalidArgumentError, NumericalFailureError
from .model import (
    SX,
    SY,
    SZ,
    J,
    ModelParams,
    QuenchSchedule,
    antiperiodic_momenta,
    gate_sequence,
)

DENSE_MAX_SITES = 12

# ===================================================================== free fermions


@dataclass
class BdGModeState:
    k: float
    u: complex
    v: complex

    @property
    def norm(self) -> float:
        return abs(self.u) ** 2 + abs(self.v) ** 2


def bdg_matrix(k, g) -> np.ndarray:
    """2x2 mode Hamiltonian (time units of the spin model, hence the factor 2)."""
    a = g - np.cos(k)
    b = np.sin(k)
    return 2.0 * J * np.array([[a, b], [b, -a]])


def _eigvecs(k, g):
    """(positive-energy, negative-energy) eigenvectors of the mode matrix, batched over k."""
    a = g - np.cos(k)
    b = np.sin(k)
    eps = np.hypot(a, b)
    # positive eigenvector (cos th/2, sin th/2) with tan th = b/a
    th = np.arctan2(b, a)
    plus = np.stack([np.cos(th / 2), np.sin(th / 2)])
    minus = np.stack([-np.sin(th / 2), np.cos(th / 2)])
    return plus, minus, eps


def bdg_evolve_modes(ks, schedule: QuenchSchedule, ode_tol: float = 1e-10, method: str = "DOP853"):
    """Evolve every mode in ``ks`` from the positive-energy eigenvector at t_start.

    ``ode_tol`` is the target accuracy of the final amplitudes; the local
    step tolerance is set two orders tighter because the error of a long
    oscillatory integration accumulates over many steps.
    Returns complex arrays ``(u, v)`` at ``t_end``.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=float))
    if not ode_tol > 0:
        raise InvalidArgumentError("ode_tol must be positive")
    plus, _, _ = _eigvecs(ks, schedule.g_start)
    y0 = np.concatenate([plus[0], plus[1]]).astype(complex)
    cos_k, sin_k = np.cos(ks), np.sin(ks)
    M = len(ks)

    def rhs(t, y):
        g = schedule(min(max(t, schedule.t_start), schedule.t_end))
        a = 2.0 * J * (g - cos_k)
        b = 2.0 * J * sin_k
        u, v = y[:M], y[M:]
        return -1j * np.concatenate([a * u + b * v, b * u - a * v])

    sol = solve_ivp(rhs, (schedule.t_start, schedule.t_end), y0, method=method,
                    rtol=ode_tol * 1e-2, atol=ode_tol * 1e-2)
    if sol.status != 0:
        raise NumericalFailureError(f"BdG integration failed: {sol.message}")
    y = sol.y[:, -1]
    return y[:M], y[M:]


def bdg_evolve_mode(k: float, schedule: QuenchSchedule, ode_tol: float = 1e-10) -> BdGModeState:
    u, v = bdg_evolve_modes([k], schedule, ode_tol)
    return BdGModeState(float(k), complex(u[0]), complex(v[0]))


def excitation_probability(ks, u, v, g_end: float) -> np.ndarray:
    """Weight on the negative-energy eigenvector of the final mode Hamiltonian."""
    _, minus, _ = _eigvecs(np.asarray(ks, dtype=float), g_end)
    amp = minus[0] * np.asarray(u) + minus[1] * np.asarray(v)
    return np.abs(amp) ** 2


def mode_excitations(ks, schedule: QuenchSchedule, ode_tol: float = 1e-10) -> np.ndarray:
    u, v = bdg_evolve_modes(ks, schedule, ode_tol)
    return excitation_probability(ks, u, v, schedule.g_end)


def lz_probability(k, tau_q: float):
    """Landau-Zener estimate exp(-2 pi tau_q k^2) (hbar = 1)."""
    if not tau_q > 0:
        raise InvalidArgumentError(f"tau_q must be positive, got {tau_q}")
    return np.exp(-2.0 * np.pi * tau_q * np.asarray(k, dtype=float) ** 2)


def defect_density_thermodynamic(tau_q: float) -> float:
    """Gaussian integral of the LZ probabilities: (1/2pi) sqrt(1/(2 tau_q))."""
    if not tau_q > 0:
        raise InvalidArgumentError(f"tau_q must be positive, got {tau_q}")
    return 1.0 / (2.0 * math.pi) * math.sqrt(1.0 / (2.0 * J * tau_q))


def defect_density_ff(schedule: QuenchSchedule, N="thermodynamic", ode_tol: float = 1e-10) -> float:
    """Kink density after the quench.

    ``N="thermodynamic"`` uses the closed form (linear ramps only); an even
    integer N averages ODE excitation probabilities over the antiperiodic grid.
    """
    if N == "thermodynamic":
        if schedule.shape != "linear":
            raise InvalidArgumentError("closed-form defect density exists only for linear schedules")
        return defect_density_thermodynamic(schedule.tau_q)
    N = int(N)
    ks = antiperiodic_momenta(N)
    # p(-k) = p(k): the mode matrices at +-k are conjugate under sigma^z
    kpos = ks[ks > 0]
    return float(2.0 * mode_excitations(kpos, schedule, ode_tol).sum() / N)


# ===================================================================== dense states


@dataclass
class DenseState:
    N: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.N > DENSE_MAX_SITES:
            raise CapacityError(f"dense engine handles at most {DENSE_MAX_SITES} sites, got {self.N}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape != (2**self.N,):
            raise InvalidArgumentError("amplitude vector length must be 2^N")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _check_capacity(N):
    if N > DENSE_MAX_SITES:
        raise CapacityError(f"dense engine handles at most {DENSE_MAX_SITES} sites, got {N}")


def dense_apply_gate(vec: np.ndarray, N: int, gate: np.ndarray, bond: int) -> np.ndarray:
    """Apply a 4x4 gate on sites (bond, bond+1); site 0 is the most significant bit."""
    psi = vec.reshape(2**bond, 4, 2 ** (N - bond - 2))
    return np.einsum("ij,ajb->aib", gate, psi).reshape(-1)


def dense_evolve(initial: DenseState, layers) -> DenseState:
    """Apply every gate of ``layers`` (an iterable of GateLayer) in order."""
    N = initial.N
    _check_capacity(N)
    vec = initial.amplitudes.copy()
    for layer in layers:
        for bond, gate in layer.ordered():
            vec = dense_apply_gate(vec, N, gate, bond)
    out = DenseState(N, vec)
    if abs(out.norm - 1.0) > 1e-10:
        raise NumericalFailureError(f"dense evolution lost unitarity (norm {out.norm})")
    return out


def sparse_hamiltonian(N: int, g: float) -> sp.csr_matrix:
    """Open-chain H built from single-site Paulis (independent of the bond splitting)."""
    _check_capacity(N)

    def site_op(op, i):
        return sp.kron(sp.kron(sp.identity(2**i), sp.csr_matrix(op.real)), sp.identity(2 ** (N - i - 1)))

    H = sp.csr_matrix((2**N, 2**N))
    for i in range(N - 1):
        H = H - J * (site_op(SZ, i) @ site_op(SZ, i + 1))
    for i in range(N):
        H = H - g * site_op(SX, i)
    return H.tocsr()


def dense_ground_state(params: ModelParams, g: float) -> tuple[DenseState, float]:
    N = params.N
    _check_capacity(N)
    H = sparse_hamiltonian(N, g)
    if 2**N <= 256:
        w, V = np.linalg.eigh(H.toarray())
        e, v = w[0], V[:, 0]
    else:
        rng = np.random.default_rng(0)
        w, V = eigsh(H, k=1, which="SA", tol=1e-14, v0=rng.standard_normal(2**N))
        e, v = w[0], V[:, 0]
    v = v / np.linalg.norm(v)
    return DenseState(N, v.astype(complex)), float(e)


def dense_quench(N: int, schedule: QuenchSchedule, dt: float, g_initial=None) -> DenseState:
    """Ground state at g_start followed by the Trotterized quench."""
    psi0, _ = dense_ground_state(ModelParams(N), schedule.g_start if g_initial is None else g_initial)
    return dense_evolve(psi0, gate_sequence(schedule, N, dt))


def dense_sz_correlations(state: DenseState) -> tuple[np.ndarray, np.ndarray]:
    """(<sz_m sz_n> matrix, <sz_n> vector) from basis-state probabilities."""
    N = state.N
    prob = np.abs(state.amplitudes) ** 2
    idx = np.arange(2**N)
    # bit of site n (site 0 most significant): 0 -> +1, 1 -> -1
    z = 1.0 - 2.0 * ((idx[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1)
    return (z * prob[:, None]).T @ z, prob @ z


def dense_expectation(state: DenseState, op: np.ndarray, site: int) -> float:
    N = state.N
    psi = state.amplitudes.reshape(2**site, 2, 2 ** (N - site - 1))
    return float(np.einsum("asb,st,atb->", psi.conj(), op, psi).real)


def dense_observables(state: DenseState) -> dict:
    corr, sz = dense_sz_correlations(state)
    N = state.N
    second = corr.sum() / N
    mean = sz.sum() ** 2 / N
    anchor = N // 2 - 1
    return {
        "f_q": float(second - mean),
        "mean_term": float(mean),
        "n_d": float(np.mean(0.5 * (1.0 - np.diag(corr, 1)))),
        "mean_sz": float(np.max(np.abs(sz))),
        "C_z": [(r, float(corr[anchor, anchor + r])) for r in range(1, N // 2)] if N >= 4 else [],
        "corr": corr,
        "sz": sz,
    }


# ===================================================================== Gaussian circuit

# two-site images of the four Majoranas living on a bond (the string to the left cancels)
_BOND_MAJORANAS = [np.kron(SZ, np.eye(2)), np.kron(SY, np.eye(2)), np.kron(SX, SZ), np.kron(SX, SY)]


def pfaffian(A: np.ndarray) -> float:
    """Pfaffian of a real antisymmetric matrix by pivoted Parlett-Reid elimination."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n % 2:
        return 0.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0.0:
            return 0.0
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return float(pf)


def majorana_hamiltonian(N: int, g: float) -> np.ndarray:
    """Real antisymmetric h with H = (i/4) a^T h a for the open chain."""
    h = np.zeros((2 * N, 2 * N))
    for j in range(N):
        h[2 * j, 2 * j + 1] = -2.0 * g  # sx_j = i a_2j a_2j+1
    for j in range(N - 1):
        h[2 * j + 1, 2 * j + 2] = -2.0 * J  # sz_j sz_j+1 = i a_2j+1 a_2j+2
    return h - h.T


def gaussian_ground_state(N: int, g: float) -> np.ndarray:
    """Ground-state covariance M = i sign(i h)."""
    w, V = np.linalg.eigh(1j * majorana_hamiltonian(N, g))
    if np.min(np.abs(w)) < 1e-12:
        raise NumericalFailureError(f"degenerate Gaussian ground state at g={g}")
    return np.real(1j * (V * np.sign(w)) @ V.conj().T)


def gate_rotation(gate: np.ndarray) -> np.ndarray:
    """R with U^dag a_k U = sum_n R_kn a_n on the bond's four Majoranas."""
    R = np.empty((4, 4))
    for k, ak in enumerate(_BOND_MAJORANAS):
        heis = gate.conj().T @ ak @ gate
        for n, an in enumerate(_BOND_MAJORANAS):
            R[k, n] = np.trace(an @ heis).real / 4.0
    if np.max(np.abs(R @ R.T - np.eye(4))) > 1e-10:
        raise NumericalFailureError("gate is not Gaussian")
    return R


def gaussian_evolve(M: np.ndarray, layers) -> np.ndarray:
    """Push the covariance through every gate of ``layers`` in order."""
    M = np.array(M, dtype=float)
    cache = {}
    for layer in layers:
        for bond, gate in layer.ordered():
            key = id(gate)
            if key not in cache:
                cache[key] = (gate, gate_rotation(gate))
            R = cache[key][1]
            idx = slice(2 * bond, 2 * bond + 4)
            M[idx, :] = R @ M[idx, :]
            M[:, idx] = M[:, idx] @ R.T
    return M


def gaussian_quench(N: int, schedule: QuenchSchedule, dt: float) -> np.ndarray:
    """Covariance after the Trotterized quench from the ground state at g_start."""
    return gaussian_evolve(gaussian_ground_state(N, schedule.g_start), gate_sequence(schedule, N, dt))


def gaussian_sz_correlation(M: np.ndarray, m: int, n: int) -> float:
    """<sz_m sz_n> = Pf of the covariance block on Majoranas 2m+1 .. 2n."""
    if m == n:
        return 1.0
    m, n = min(m, n), max(m, n)
    return pfaffian(M[2 * m + 1:2 * n + 1, 2 * m + 1:2 * n + 1])


def gaussian_observables(M: np.ndarray) -> dict:
    """f_Q, n_d and the central C_z(r) profile; <sz> vanishes by parity."""
    N = M.shape[0] // 2
    corr = np.eye(N)
    for m in range(N):
        for n in range(m + 1, N):
            corr[m, n] = corr[n, m] = gaussian_sz_correlation(M, m, n)
    anchor = N // 2 - 1
    return {
        "f_q": float(corr.sum() / N),
        "n_d": float(np.mean(0.5 * (1.0 - np.diag(corr, 1)))),
        "C_z": [(r, float(corr[anchor, anchor + r])) for r in range(1, N // 2)] if N >= 4 else [],
        "corr": corr,
    }


def dense_trotter_step(vec: np.ndarray, N: int, layers) -> np.ndarray:
    for layer in layers:
        for bond, gate in layer.ordered():
            vec = dense_apply_gate(vec, N, gate, bond)
    return vec


__all__ = [
    "BdGModeState",
    "DenseState",
    "bdg_evolve_mode",
    "bdg_evolve_modes",
    "bdg_matrix",
    "defect_density_ff",
    "defect_density_thermodynamic",
    "dense_apply_gate",
    "dense_evolve",
    "dense_expectation",
    "dense_ground_state",
    "dense_observables",
    "dense_quench",
    "excitation_probability",
    "gate_rotation",
    "gaussian_evolve",
    "gaussian_ground_state",
    "gaussian_observables",
    "gaussian_quench",
    "gaussian_sz_correlation",
    "lz_probability",
    "majorana_hamiltonian",
    "mode_excitations",
    "pfaffian",
    "sparse_hamiltonian",
]
