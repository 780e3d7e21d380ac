import numpy as np
import pytest

from kzqfi.dmrg import DMRGConfig, ground_state, tfim_mpo
from kzqfi.errors import ConvergenceError, InvalidArgumentError
from kzqfi.model import SX, SZ, ModelParams, full_hamiltonian_dense
from kzqfi.mps import PLUS_X, product_state
from kzqfi.oracles import dense_expectation, dense_ground_state


def free_fermion_energy(N, g):
    """Open-chain ground energy: minus the sum of singular values of the hopping matrix."""
    B = np.diag(np.full(N, g)) + np.diag(np.ones(N - 1), 1)
    return -np.linalg.svd(B, compute_uv=False).sum()


def mpo_dense(W):
    N = len(W)
    M = W[0]
    for w in W[1:]:
        # M[a, b, s, t] x w[b, c, u, v] -> [a, c, (s u), (t v)]
        M = np.einsum("abst,bcuv->acsutv", M, w)
        a, c, d1, d2 = M.shape[0], M.shape[1], M.shape[2] * M.shape[3], M.shape[4] * M.shape[5]
        M = M.reshape(a, c, d1, d2)
    assert M.shape[:2] == (1, 1)
    return M[0, 0].reshape(2**N, 2**N)


@pytest.mark.parametrize("N", [2, 3, 5])
def test_mpo_is_hamiltonian(N):
    assert np.allclose(mpo_dense(tfim_mpo(N, 1.7)), full_hamiltonian_dense(N, 1.7).real)


def test_energy_matches_ed_n8_g5():
    res = ground_state(ModelParams(8), 5.0)
    _, e0 = dense_ground_state(ModelParams(8), 5.0)
    assert abs(res.energy - e0) < 1e-8
    assert res.energy >= e0 - 1e-12


def test_paramagnet_symmetric_and_matches_ed():
    psi = ground_state(ModelParams(8), 5.0).state
    ref, _ = dense_ground_state(ModelParams(8), 5.0)
    sx = psi.one_site_profile(SX)
    assert np.allclose(sx, [dense_expectation(ref, SX, n) for n in range(8)], atol=1e-8)
    assert np.max(np.abs(psi.one_site_profile(SZ))) < 1e-8


def test_paramagnet_polarized():
    # exact bulk value at g=5 is 0.98992 (ED and the infinite-chain integral agree)
    psi = ground_state(ModelParams(8), 5.0).state
    assert np.all(psi.one_site_profile(SX) > 0.99)


def test_large_field_limit():
    psi = ground_state(ModelParams(8), 500.0).state
    overlap = np.vdot(product_state(8, PLUS_X).to_dense(), psi.to_dense())
    assert abs(overlap) ** 2 > 1 - 1e-4


def test_pinned_ed_energy_n8_g1():
    _, e0 = dense_ground_state(ModelParams(8), 1.0)
    assert e0 == pytest.approx(-9.837951447459412, abs=1e-10)
    assert ground_state(ModelParams(8), 1.0).energy == pytest.approx(e0, abs=1e-8)


@pytest.mark.parametrize("N,g", [(16, 1.0), (32, 1.0), (24, 2.0)])
def test_energy_vs_free_fermions(N, g):
    res = ground_state(ModelParams(N), g, DMRGConfig(chi_max=64))
    assert res.energy == pytest.approx(free_fermion_energy(N, g), abs=1e-8)


def test_deterministic():
    a = ground_state(ModelParams(10), 1.5, DMRGConfig(seed=3)).energy
    b = ground_state(ModelParams(10), 1.5, DMRGConfig(seed=3)).energy
    assert abs(a - b) < 1e-12


def test_state_is_canonical_and_normalized():
    psi = ground_state(ModelParams(10), 2.0).state
    assert psi.is_canonical()
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)


def test_not_converged_raises():
    with pytest.raises(ConvergenceError):
        ground_state(ModelParams(20), 1.0, DMRGConfig(max_sweeps=1))


def test_bad_config():
    with pytest.raises(InvalidArgumentError):
        DMRGConfig(chi_max=1)
    with pytest.raises(InvalidArgumentError):
        DMRGConfig(energy_tol=0.0)
