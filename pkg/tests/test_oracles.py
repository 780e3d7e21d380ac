import math

import numpy as np
import pytest

from kzqfi.analysis import power_law_fit
from kzqfi.errors import InvalidArgumentError, NumericalFailureError
from kzqfi.model import ModelParams, QuenchSchedule, antiperiodic_momenta
from kzqfi.oracles import (
    dense_observables,
    dense_quench,
    DenseState,
    bdg_evolve_mode,
    bdg_evolve_modes,
    bdg_matrix,
    defect_density_ff,
    defect_density_thermodynamic,
    dense_evolve,
    dense_ground_state,
    excitation_probability,
    gate_rotation,
    gaussian_ground_state,
    gaussian_observables,
    gaussian_quench,
    majorana_hamiltonian,
    lz_probability,
    mode_excitations,
    pfaffian,
)
from kzqfi.model import GateLayer, bond_gate

RATES = [1, 2, 4, 8, 16, 32]


def test_bdg_matrix_spectrum():
    w = np.linalg.eigvalsh(bdg_matrix(0.7, 1.3))
    eps = math.hypot(1.3 - math.cos(0.7), math.sin(0.7))
    assert np.allclose(w, [-2 * eps, 2 * eps])


def test_maximal_gap_mode_adiabatic():
    s = QuenchSchedule.linear(5.0)
    m = bdg_evolve_mode(math.pi - 1e-9, s)
    assert excitation_probability([m.k], [m.u], [m.v], 0.0)[0] < 1e-10


def test_frozen_schedule_keeps_mode():
    s = QuenchSchedule.constant(2.0, 3.0)
    k = 0.4
    u, v = bdg_evolve_modes([k], s)
    w, V = np.linalg.eigh(bdg_matrix(k, 2.0))
    overlap = abs(np.vdot(V[:, 1], [u[0], v[0]]))
    assert overlap == pytest.approx(1.0, abs=1e-9)


def test_small_k_lz():
    p = mode_excitations([0.1], QuenchSchedule.linear(5.0))[0]
    assert abs(p - math.exp(-2 * math.pi * 5 * 0.01)) < 2e-3


def test_lz_closed_form():
    assert lz_probability(0.0, 3.0) == 1.0
    assert lz_probability(0.3, 1e6) < 1e-300
    assert lz_probability(1.0, 1 / (2 * math.pi)) == pytest.approx(math.exp(-1))
    with pytest.raises(InvalidArgumentError):
        lz_probability(0.1, 0.0)


@pytest.mark.parametrize("sched", [QuenchSchedule.linear(8.0), QuenchSchedule.power(4.0, 3.0),
                                   QuenchSchedule.linear(32.0)])
def test_mode_norm_conserved(sched):
    ks = antiperiodic_momenta(64)
    u, v = bdg_evolve_modes(ks, sched, ode_tol=1e-10)
    assert np.max(np.abs(np.abs(u) ** 2 + np.abs(v) ** 2 - 1.0)) < 1e-10


def test_lz_agreement_grid():
    """ODE vs exp(-2 pi tau k^2) on the N=128 grid, |k| < 0.5."""
    ks = antiperiodic_momenta(128)
    ks = ks[np.abs(ks) < 0.5]
    devs = []
    for tau in (2, 5, 10):
        p = mode_excitations(ks, QuenchSchedule.linear(tau))
        devs.append(np.max(np.abs(p - lz_probability(ks, tau))))
    print("max |p_ode - p_lz| for tau = 2, 5, 10:", devs)
    assert max(devs) < 5e-3
    assert devs[0] >= devs[1] >= devs[2]


def test_ode_matches_exact_lz_on_long_ramp():
    # a ramp from far above to far below criticality is the textbook LZ sweep,
    # whose exact answer for this mode matrix is exp(-2 pi tau sin^2 k)
    ks = np.linspace(0.1, 0.5, 5)
    p = mode_excitations(ks, QuenchSchedule.linear(4.0, g_start=20.0, g_end=-20.0))
    assert np.max(np.abs(p - np.exp(-2 * math.pi * 4.0 * np.sin(ks) ** 2))) < 1e-5


def test_thermodynamic_density():
    assert defect_density_ff(QuenchSchedule.linear(1.0)) == pytest.approx(1 / (2 * math.pi * math.sqrt(2)))
    assert defect_density_thermodynamic(4.0) / defect_density_thermodynamic(1.0) == pytest.approx(0.5)
    with pytest.raises(InvalidArgumentError):
        defect_density_ff(QuenchSchedule.power(1.0, 2.0))


def test_momentum_sum_vs_closed_form():
    nd = defect_density_ff(QuenchSchedule.linear(2.0), 512)
    ref = defect_density_thermodynamic(2.0)
    print(f"N=512 tau=2: ODE sum {nd:.6f}, closed form {ref:.6f}, rel {abs(nd / ref - 1):.4f}")
    assert abs(nd / ref - 1) < 0.01


def test_thermodynamic_scaling():
    fit = power_law_fit([(t, defect_density_thermodynamic(t)) for t in RATES])
    assert fit.exponent == pytest.approx(-0.5, abs=0.01)


def test_momentum_sum_scaling_n1024():
    fit = power_law_fit([(t, defect_density_ff(QuenchSchedule.linear(t), 1024)) for t in RATES])
    print("N=1024 momentum-sum slope:", fit.exponent)
    assert fit.exponent == pytest.approx(-0.5, abs=0.01)


@pytest.mark.parametrize("alpha", [2, 3])
def test_nonlinear_ff_scaling(alpha):
    # rates deep in the slow regime; below tau ~ 8 the local slopes still drift
    rates = [16, 32, 64, 128]
    fit = power_law_fit([(t, defect_density_ff(QuenchSchedule.power(t, alpha), 512)) for t in rates])
    print(f"alpha={alpha} slope {fit.exponent:.4f}")
    assert fit.exponent == pytest.approx(-alpha / (alpha + 1), abs=0.03)


def test_dense_identity_and_swap():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    v /= np.linalg.norm(v)
    st = DenseState(3, v)
    same = dense_evolve(st, [GateLayer([0, 1], [np.eye(4), np.eye(4)])])
    assert np.allclose(same.amplitudes, v)
    swap = np.eye(4)[[0, 2, 1, 3]]
    out = dense_evolve(st, [GateLayer([1], [swap])])
    # swapping sites 1 and 2 permutes the two low bits
    perm = [0, 2, 1, 3, 4, 6, 5, 7]
    assert np.allclose(out.amplitudes, v[perm])


def test_dense_ground_state_small():
    _, e = dense_ground_state(ModelParams(2), 0.0)
    assert e == pytest.approx(-1.0)
    st, e = dense_ground_state(ModelParams(2), 1e4)
    assert e == pytest.approx(-2e4, rel=1e-6)
    assert abs(np.vdot(np.full(4, 0.5), st.amplitudes)) == pytest.approx(1.0, abs=1e-6)


def test_pfaffian():
    rng = np.random.default_rng(3)
    for n in (2, 6, 10):
        A = rng.standard_normal((n, n))
        A = A - A.T
        assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-10)
    blocks = np.zeros((4, 4))
    blocks[0, 1], blocks[2, 3] = 2.0, -3.0
    blocks -= blocks.T
    assert pfaffian(blocks) == pytest.approx(-6.0)
    assert pfaffian(np.zeros((3, 3))) == 0.0


@pytest.mark.parametrize("N,g", [(8, 1.0), (8, 5.0), (11, 0.7)])
def test_gaussian_ground_energy(N, g):
    M = gaussian_ground_state(N, g)
    energy = 0.25 * np.sum(majorana_hamiltonian(N, g) * M)
    assert energy == pytest.approx(dense_ground_state(ModelParams(N), g)[1], abs=1e-9)
    assert np.allclose(M @ M, -np.eye(2 * N), atol=1e-10)  # pure state


def test_gate_rotation_orthogonal():
    R = gate_rotation(bond_gate(6, 2, 0.8, 0.3))
    assert np.allclose(R @ R.T, np.eye(4), atol=1e-12)
    with pytest.raises(NumericalFailureError):
        gate_rotation(np.diag([1, 1, 1, 1j]))


def test_gaussian_circuit_matches_dense():
    sched = QuenchSchedule.linear(1.0)
    ref = dense_observables(dense_quench(8, sched, 0.02))
    out = gaussian_observables(gaussian_quench(8, sched, 0.02))
    assert np.max(np.abs(out["corr"] - ref["corr"])) < 1e-10
    assert out["f_q"] == pytest.approx(ref["f_q"], abs=1e-10)
