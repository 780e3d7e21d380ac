import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kzqfi.errors import InvalidArgumentError, InvalidInputError
from kzqfi.linalg import contract, hermitian_expm, svd_truncated
from kzqfi.model import SZ, bond_hamiltonian


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_svd_identity():
    res = svd_truncated(np.eye(2), 2, 0.0)
    assert np.allclose(res.S, [1, 1])
    assert res.discarded_weight == 0


def test_svd_rank_one():
    res = svd_truncated(np.ones((2, 2)), 1, 1e-12)
    assert np.allclose(res.S, [2])
    assert res.discarded_weight == pytest.approx(0, abs=1e-15)


def test_svd_discarded_weight_matches_full_decomposition():
    rng = np.random.default_rng(1)
    M = rand_complex(rng, 8, 8)
    s = np.linalg.svd(M, compute_uv=False)
    res = svd_truncated(M, 4)
    assert res.rank == 4
    assert res.discarded_weight == pytest.approx(np.sum(s[4:] ** 2) / np.sum(s**2), rel=1e-12)


def test_svd_eps_keeps_fewest_values():
    M = np.diag([1.0, 0.1, 0.01, 0.001])
    res = svd_truncated(M, 4, eps=1.5e-4 / 1.010101)
    # dropping 0.01 and 0.001 costs ~1e-4 relative weight, dropping only 0.001 costs ~1e-6
    assert res.rank == 2


def test_svd_drops_noise_floor():
    res = svd_truncated(np.diag([1.0, 1e-16]), 2, 0.0)
    assert res.rank == 1


@pytest.mark.parametrize("shape", [(3, 5), (16, 16), (64, 40), (64, 64)])
def test_svd_full_rank_reconstruction(shape):
    rng = np.random.default_rng(sum(shape))
    M = rand_complex(rng, *shape)
    res = svd_truncated(M, min(shape), 0.0)
    R = (res.U * res.S) @ res.Vh
    assert np.linalg.norm(R - M) / np.linalg.norm(M) < 1e-10


def test_svd_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        svd_truncated(np.array([[np.nan, 1.0]]), 1)
    with pytest.raises(InvalidArgumentError):
        svd_truncated(np.ones((2, 2)), 0)
    with pytest.raises(InvalidArgumentError):
        svd_truncated(np.ones((2, 2)), 1, eps=-1.0)


def test_expm_pauli_z():
    U = hermitian_expm(SZ, -1j * np.pi / 2)
    assert np.allclose(U, np.diag([-1j, 1j]), atol=1e-14)


def test_expm_zero_generator():
    assert np.allclose(hermitian_expm(np.zeros((3, 3)), 0.7 - 2j), np.eye(3))


def taylor_expm(A, terms=30):
    out = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ A / n
        out = out + term
    return out


def test_expm_gate_vs_taylor():
    h = bond_hamiltonian(6, 2, 1.0)
    U = hermitian_expm(h, -0.02j)
    assert np.max(np.abs(U - taylor_expm(-0.02j * h))) < 1e-12
    assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-13)


def test_expm_inverse_pair():
    rng = np.random.default_rng(3)
    A = rand_complex(rng, 6, 6)
    H = A + A.conj().T
    prod = hermitian_expm(H, -0.8j) @ hermitian_expm(H, 0.8j)
    assert np.max(np.abs(prod - np.eye(6))) < 1e-11


def test_expm_rejects_non_hermitian():
    with pytest.raises(InvalidInputError):
        hermitian_expm(np.array([[0, 1], [0, 0]]), 1j)


def test_contract_identity_vector():
    v = np.array([2.0 + 1j, -3.0])
    assert np.allclose(contract(np.eye(2), v, [(1, 0)]), v)


def test_contract_matches_loop_multiply():
    rng = np.random.default_rng(4)
    A, B = rng.standard_normal((3, 4)), rng.standard_normal((4, 5))
    ref = np.zeros((3, 5))
    for i in range(3):
        for j in range(5):
            for k in range(4):
                ref[i, j] += A[i, k] * B[k, j]
    assert np.allclose(contract(A, B, [(1, 0)]), ref)


def test_contract_full_is_frobenius_norm():
    rng = np.random.default_rng(5)
    T = rand_complex(rng, 2, 3, 4)
    val = contract(T.conj(), T, [(0, 0), (1, 1), (2, 2)])
    assert val == pytest.approx(np.linalg.norm(T) ** 2)


def test_contract_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        contract(np.ones((2, 3)), np.ones((2, 3)), [(1, 0)])


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 1000))
def test_contract_bilinear(alpha, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((3, 2, 4)), rng.standard_normal((4, 2))
    lhs = contract(alpha * A, B, [(2, 0), (1, 1)])
    assert np.allclose(lhs, alpha * contract(A, B, [(2, 0), (1, 1)]))
