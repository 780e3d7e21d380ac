"""Open-boundary matrix product states.

Site tensors have shape ``(chi_left, 2, chi_right)``; the physical index is
``0 = |up>``, ``1 = |down>`` in the sigma^z basis.  Sites are 0-based
internally.  When ``center`` is an integer the state is in mixed canonical
form: tensors left of it are left isometries, tensors right of it are right
isometries, and the norm sits in ``tensors[center]``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, InvalidInputError, NumericalFailureError
from .linalg import svd_truncated

UP = np.array([1.0, 0.0], dtype=complex)
DOWN = np.array([0.0, 1.0], dtype=complex)
PLUS_X = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)

_IMAG_TOL = 1e-10


def _transfer(E, A, op=None):
    """Push a left environment ``E[bra, ket]`` through one site."""
    T = np.tensordot(E, A, axes=(1, 0))  # (a, t, c)
    if op is not None:
        T = np.tensordot(op, T, axes=(1, 1)).transpose(1, 0, 2)  # (a, s, c)
    return np.tensordot(A.conj(), T, axes=([0, 1], [0, 1]))


def _close(E, A, op=None):
    """Finish a contraction at ``A`` assuming the right environment is the identity."""
    T = np.tensordot(E, A, axes=(1, 0))
    if op is not None:
        T = np.tensordot(op, T, axes=(1, 1)).transpose(1, 0, 2)
    return np.vdot(A, T)


class MPSState:
    def __init__(self, tensors, center=None, cumulative_truncation_error=0.0):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        self.center = center
        self.cumulative_truncation_error = float(cumulative_truncation_error)
        self._check_shapes()

    def _check_shapes(self):
        ts = self.tensors
        if not ts:
            raise InvalidArgumentError("MPS needs at least one site")
        for i, t in enumerate(ts):
            if t.ndim != 3 or t.shape[1] != 2:
                raise InvalidArgumentError(f"site {i}: expected (chi_l, 2, chi_r), got {t.shape}")
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise InvalidArgumentError("boundary bonds must have dimension 1")
        for i in range(len(ts) - 1):
            if ts[i].shape[2] != ts[i + 1].shape[0]:
                raise InvalidArgumentError(f"bond {i} dimension mismatch")

    @property
    def N(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond_dim(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "MPSState":
        return MPSState([t.copy() for t in self.tensors], self.center, self.cumulative_truncation_error)

    def _site(self, site):
        if not isinstance(site, (int, np.integer)) or not 0 <= site < self.N:
            raise InvalidArgumentError(f"site {site!r} out of range [0, {self.N - 1}]")
        return int(site)

    # ----------------------------------------------------------- canonical form

    def _shift_right(self, i):
        A = self.tensors[i]
        l, d, r = A.shape
        Q, R = np.linalg.qr(A.reshape(l * d, r))
        self.tensors[i] = Q.reshape(l, d, Q.shape[1])
        self.tensors[i + 1] = np.tensordot(R, self.tensors[i + 1], axes=(1, 0))

    def _shift_left(self, i):
        A = self.tensors[i]
        l, d, r = A.shape
        Q, R = np.linalg.qr(A.reshape(l, d * r).T)
        self.tensors[i] = Q.T.reshape(Q.shape[1], d, r)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], R.T, axes=(2, 0))

    def canonicalize(self, center: int = 0) -> "MPSState":
        """Bring the state into mixed canonical form around ``center`` and normalize."""
        center = self._site(center)
        for i in range(center):
            self._shift_right(i)
        for i in range(self.N - 1, center, -1):
            self._shift_left(i)
        self.center = center
        self.normalize()
        return self

    def move_center(self, site: int) -> "MPSState":
        site = self._site(site)
        if self.center is None:
            return self.canonicalize(site)
        while self.center < site:
            self._shift_right(self.center)
            self.center += 1
        while self.center > site:
            self._shift_left(self.center)
            self.center -= 1
        return self

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        E = np.ones((1, 1), dtype=complex)
        for A in self.tensors:
            E = _transfer(E, A)
        return float(np.sqrt(abs(E[0, 0])))

    def normalize(self) -> "MPSState":
        if self.center is None:
            self.canonicalize(0)
            return self
        nrm = np.linalg.norm(self.tensors[self.center])
        if not np.isfinite(nrm) or nrm == 0.0:
            raise NumericalFailureError("MPS has zero or non-finite norm")
        self.tensors[self.center] = self.tensors[self.center] / nrm
        return self

    def is_canonical(self, tol: float = 1e-10) -> bool:
        if self.center is None:
            return False
        for i, A in enumerate(self.tensors):
            l, d, r = A.shape
            if i < self.center:
                M = A.reshape(l * d, r)
                G = M.conj().T @ M
            elif i > self.center:
                M = A.reshape(l, d * r)
                G = M @ M.conj().T
            else:
                continue
            if np.max(np.abs(G - np.eye(G.shape[0]))) > tol:
                return False
        return True

    # ------------------------------------------------------------------- gates

    def apply_two_site_gate(self, gate, bond: int, chi_max: int, eps: float = 0.0,
                            direction: str = "right", check: bool = True) -> float:
        """Apply a 4x4 unitary on sites ``(bond, bond+1)``, truncate, renormalize.

        Afterwards the canonical center is ``bond + 1`` for ``direction="right"``
        and ``bond`` for ``"left"``.  Returns the discarded weight, which is also
        added to ``cumulative_truncation_error``.
        """
        if not 0 <= bond < self.N - 1:
            raise InvalidArgumentError(f"bond {bond} out of range for N={self.N}")
        gate = np.asarray(gate, dtype=complex)
        if check:
            if gate.shape != (4, 4):
                raise InvalidArgumentError(f"gate must be 4x4, got {gate.shape}")
            if not np.all(np.isfinite(gate)) or np.max(np.abs(gate.conj().T @ gate - np.eye(4))) > 1e-10:
                raise InvalidInputError("two-site gate is not unitary")
        if self.center is None or self.center not in (bond, bond + 1):
            if self.center is None:
                self.canonicalize(bond)
            else:
                self.move_center(bond if self.center < bond else bond + 1)
        A, B = self.tensors[bond], self.tensors[bond + 1]
        l, r = A.shape[0], B.shape[2]
        theta = np.tensordot(A, B, axes=(2, 0))  # (l, s1, s2, r)
        theta = (gate @ theta.transpose(1, 2, 0, 3).reshape(4, l * r)).reshape(2, 2, l, r)
        theta = theta.transpose(2, 0, 1, 3).reshape(l * 2, 2 * r)
        res = svd_truncated(theta, chi_max, eps)
        S = res.S / np.linalg.norm(res.S)
        k = len(S)
        if direction == "right":
            self.tensors[bond] = res.U.reshape(l, 2, k)
            self.tensors[bond + 1] = (S[:, None] * res.Vh).reshape(k, 2, r)
            self.center = bond + 1
        elif direction == "left":
            self.tensors[bond] = (res.U * S).reshape(l, 2, k)
            self.tensors[bond + 1] = res.Vh.reshape(k, 2, r)
            self.center = bond
        else:
            raise InvalidArgumentError(f"direction must be 'left' or 'right', got {direction!r}")
        self.cumulative_truncation_error += res.discarded_weight
        return res.discarded_weight

    # ------------------------------------------------------------ measurements

    def _window(self, ops: dict) -> complex:
        """<psi| prod_site ops[site] |psi> / <psi|psi>, contracting only what canonical form requires."""
        sites = sorted(ops)
        if self.center is None:
            lo, hi = 0, self.N - 1
        else:
            lo, hi = min(sites[0], self.center), max(sites[-1], self.center)
        E = np.eye(self.tensors[lo].shape[0], dtype=complex)
        Z = E.copy()
        for i in range(lo, hi + 1):
            A = self.tensors[i]
            E = _transfer(E, A, ops.get(i))
            Z = _transfer(Z, A)
        return np.trace(E) / np.trace(Z)

    @staticmethod
    def _real(val, what):
        if abs(val.imag) > _IMAG_TOL * max(1.0, abs(val.real)):
            raise InvalidInputError(f"{what} has imaginary part {val.imag:.3e}; operators must be Hermitian")
        return float(val.real)

    def expectation_one_site(self, op, site: int) -> float:
        site = self._site(site)
        return self._real(self._window({site: np.asarray(op, dtype=complex)}), "expectation value")

    def correlation_two_site(self, opA, opB, m: int, n: int) -> float:
        """<opA_m opB_n>; for m == n the on-site product opA @ opB."""
        m, n = self._site(m), self._site(n)
        opA = np.asarray(opA, dtype=complex)
        opB = np.asarray(opB, dtype=complex)
        ops = {m: opA @ opB} if m == n else {m: opA, n: opB}
        return self._real(self._window(ops), "correlation")

    def one_site_profile(self, op) -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        psi = self.copy().move_center(0) if self.center is not None else self.copy().canonicalize(0)
        out = np.empty(self.N)
        for i in range(self.N):
            A = psi.tensors[i]
            val = np.vdot(A, np.tensordot(op, A, axes=(1, 1)).transpose(1, 0, 2))
            out[i] = self._real(val, "expectation value")
            if i < self.N - 1:
                psi._shift_right(i)
                psi.center = i + 1
        return out

    def correlation_matrix(self, opA, opB=None) -> np.ndarray:
        """All ``C[m, n] = <opA_m opB_n>`` from one anchored sweep.

        On the diagonal the symmetrized product (opA opB + opB opA)/2 is used
        so the matrix stays real for any pair of Hermitian operators.

        The anchor walks left to right as the canonical center; for each anchor
        the environment carrying ``opA`` is pushed rightwards once and closed at
        every later site, so the right environment is always the identity.
        """
        opA = np.asarray(opA, dtype=complex)
        same = opB is None or np.array_equal(opA, opB)
        opB = opA if opB is None else np.asarray(opB, dtype=complex)
        psi = self.copy()
        psi.move_center(0) if psi.center is not None else psi.canonicalize(0)
        N = self.N
        C = np.empty((N, N), dtype=complex)
        onsite = 0.5 * (opA @ opB + opB @ opA)
        for m in range(N):
            A = psi.tensors[m]
            C[m, m] = _close(np.eye(A.shape[0]), A, onsite)
            EA = _transfer(np.eye(A.shape[0]), A, opA)
            EB = EA if same else _transfer(np.eye(A.shape[0]), A, opB)
            for n in range(m + 1, N):
                An = psi.tensors[n]
                C[m, n] = _close(EA, An, opB)
                C[n, m] = C[m, n] if same else _close(EB, An, opA)
                if n < N - 1:
                    EA = _transfer(EA, An)
                    EB = EA if same else _transfer(EB, An)
            if m < N - 1:
                psi._shift_right(m)
                psi.center = m + 1
        if np.max(np.abs(C.imag)) > _IMAG_TOL * max(1.0, np.max(np.abs(C.real))):
            raise InvalidInputError("correlation matrix is not real; operators must be Hermitian")
        return C.real.copy()

    def correlation_row(self, opA, opB, m: int) -> np.ndarray:
        """``[<opA_m opB_n> for n in m..N-1]`` from a single environment sweep."""
        m = self._site(m)
        opA = np.asarray(opA, dtype=complex)
        opB = np.asarray(opB, dtype=complex)
        psi = self.copy()
        psi.move_center(m) if psi.center is not None else psi.canonicalize(m)
        A = psi.tensors[m]
        out = [_close(np.eye(A.shape[0]), A, opA @ opB)]
        E = _transfer(np.eye(A.shape[0]), A, opA)
        for n in range(m + 1, self.N):
            out.append(_close(E, psi.tensors[n], opB))
            if n < self.N - 1:
                E = _transfer(E, psi.tensors[n])
        out = np.array(out)
        if np.max(np.abs(out.imag)) > _IMAG_TOL * max(1.0, np.max(np.abs(out.real))):
            raise InvalidInputError("correlations are not real; operators must be Hermitian")
        return out.real.copy()

    def to_dense(self) -> np.ndarray:
        if self.N > 24:
            raise InvalidArgumentError("refusing to densify more than 24 sites")
        v = self.tensors[0].reshape(2, -1)
        for A in self.tensors[1:]:
            v = np.tensordot(v, A, axes=(1, 0)).reshape(-1, A.shape[2])
        return v.reshape(-1)

    # -------------------------------------------------------------- checkpoints

    def save(self, path) -> None:
        """Write an ``.npz`` checkpoint (exact binary round trip)."""
        meta = {"N": self.N, "center": self.center,
                "cumulative_truncation_error": self.cumulative_truncation_error}
        arrays = {f"site_{i:04d}": t for i, t in enumerate(self.tensors)}
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "MPSState":
        with np.load(Path(path)) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            tensors = [data[f"site_{i:04d}"] for i in range(meta["N"])]
        out = cls(tensors, meta["center"], 0.0)
        out.cumulative_truncation_error = meta["cumulative_truncation_error"]
        return out


# ---------------------------------------------------------------- constructors


def product_state(N: int, local_state) -> MPSState:
    if N < 1:
        raise InvalidArgumentError(f"N must be positive, got {N}")
    v = np.asarray(local_state, dtype=complex).reshape(-1)
    if v.shape != (2,) or abs(np.vdot(v, v).real - 1.0) > 1e-12:
        raise InvalidArgumentError("local_state must be a normalized 2-component vector")
    return MPSState([v.reshape(1, 2, 1).copy() for _ in range(N)], center=0)


def basis_state(bits) -> MPSState:
    """Computational-basis product state; bit 0 = up, 1 = down."""
    return MPSState([(UP if b == 0 else DOWN).reshape(1, 2, 1).copy() for b in bits], center=0)


def ghz_state(N: int) -> MPSState:
    """(|up...up> + |down...down>)/sqrt(2) with bond dimension 2."""
    if N < 2:
        raise InvalidArgumentError(f"GHZ state needs N >= 2, got {N}")
    first = np.zeros((1, 2, 2), dtype=complex)
    first[0, 0, 0] = first[0, 1, 1] = 1.0 / np.sqrt(2.0)
    bulk = np.zeros((2, 2, 2), dtype=complex)
    bulk[0, 0, 0] = bulk[1, 1, 1] = 1.0
    last = np.zeros((2, 2, 1), dtype=complex)
    last[0, 0, 0] = last[1, 1, 0] = 1.0
    # bulk and last tensors are right isometries, so the center is site 0
    return MPSState([first] + [bulk.copy() for _ in range(N - 2)] + [last], center=0)


def random_mps(N: int, chi: int, seed=None, real: bool = False) -> MPSState:
    rng = np.random.default_rng(seed)
    dims = [1] + [min(chi, 2**min(i, N - i)) for i in range(1, N)] + [1]
    tensors = []
    for i in range(N):
        shape = (dims[i], 2, dims[i + 1])
        t = rng.standard_normal(shape)
        if not real:
            t = t + 1j * rng.standard_normal(shape)
        tensors.append(t)
    return MPSState(tensors).canonicalize(0)


def from_dense(vec, chi_max: int | None = None) -> MPSState:
    """Exact (or truncated) MPS of a 2^N amplitude vector, left-canonical with center N-1."""
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    N = int(round(np.log2(len(vec))))
    if 2**N != len(vec):
        raise InvalidArgumentError("vector length is not a power of two")
    chi_max = chi_max or 2 ** (N // 2 + 1)
    tensors = []
    rest = vec.reshape(1, -1)
    err = 0.0
    for _ in range(N - 1):
        l = rest.shape[0]
        res = svd_truncated(rest.reshape(l * 2, -1), chi_max)
        tensors.append(res.U.reshape(l, 2, -1))
        rest = res.S[:, None] * res.Vh
        err += res.discarded_weight
    tensors.append(rest.reshape(rest.shape[0], 2, 1))
    return MPSState(tensors, center=N - 1, cumulative_truncation_error=err).normalize()
