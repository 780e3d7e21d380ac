import numpy as np
import pytest

from kzqfi.dmrg import ground_state
from kzqfi.errors import BudgetExceededError, InvalidArgumentError
from kzqfi.model import SX, SZ, ModelParams, QuenchSchedule, gate_sequence, step_count
from kzqfi.mps import from_dense
from kzqfi.observables import qfi_density
from kzqfi.oracles import DenseState, dense_evolve, dense_ground_state, dense_sz_correlations
from kzqfi.tebd import EvolutionTrace, TEBDConfig, evolve


@pytest.fixture(scope="module")
def dense_gs8():
    return dense_ground_state(ModelParams(8), 5.0)[0]


def exact_cfg(chi, **kw):
    return TEBDConfig(chi_max=chi, svd_eps=0.0, **kw)


def stationary_drift(dt):
    params = ModelParams(8)
    psi0 = ground_state(params, 5.0).state
    psi, trace = evolve(psi0, QuenchSchedule.constant(5.0, 10.0), params, TEBDConfig(dt=dt))
    assert trace.times[-1] == pytest.approx(10.0)
    return max(np.max(np.abs(psi.one_site_profile(SX) - psi0.one_site_profile(SX))),
               np.max(np.abs(psi.correlation_matrix(SZ) - psi0.correlation_matrix(SZ))))


def test_stationary_eigenstate():
    # the Trotter propagator's own eigenstates differ from H's at O(dt^2 g^2),
    # which at g=5 is ~2e-4 for dt=0.02, so the step is refined here
    assert stationary_drift(0.001) < 1e-6


def test_stationary_drift_is_trotter_error():
    a, b = stationary_drift(0.02), stationary_drift(0.01)
    # second order: halving dt cuts the drift about fourfold
    assert 3.0 < a / b < 6.0


def test_fidelity_with_dense_circuit(dense_gs8):
    sched = QuenchSchedule.linear(1.0)
    psi, trace = evolve(from_dense(dense_gs8.amplitudes), sched, ModelParams(8), exact_cfg(16))
    ref = dense_evolve(dense_gs8, gate_sequence(sched, 8, 0.02))
    assert abs(np.vdot(ref.amplitudes, psi.to_dense())) ** 2 > 1 - 1e-10
    assert len(trace.times) == step_count(sched, 0.02) + 1


@pytest.mark.parametrize("N", [6, 10])
def test_correlations_equal_dense_circuit(N):
    sched = QuenchSchedule.linear(0.5)
    gs, _ = dense_ground_state(ModelParams(N), 5.0)
    psi, _ = evolve(from_dense(gs.amplitudes), sched, ModelParams(N), exact_cfg(2 ** (N // 2)))
    ref = dense_evolve(gs, gate_sequence(sched, N, 0.02))
    corr, _ = dense_sz_correlations(ref)
    assert np.max(np.abs(psi.correlation_matrix(SZ) - corr)) < 1e-10


def test_trotter_self_convergence():
    params = ModelParams(8)
    psi0 = ground_state(params, 5.0).state
    sched = QuenchSchedule.linear(1.0)
    f1 = qfi_density(evolve(psi0, sched, params, TEBDConfig(dt=0.02, chi_max=16))[0])
    f2 = qfi_density(evolve(psi0, sched, params, TEBDConfig(dt=0.01, chi_max=16))[0])
    assert abs(f1 - f2) < 1e-3


def test_norm_drift(dense_gs8):
    sched = QuenchSchedule.linear(1.0)
    psi, trace = evolve(from_dense(dense_gs8.amplitudes), sched, ModelParams(8), exact_cfg(16))
    assert abs(psi.norm() - 1.0) < 1e-8
    # without truncation the only pre-renormalization loss per step is round-off
    assert np.max(np.diff(trace.cumulative_truncation)) < 1e-10


def test_truncation_monotone():
    params = ModelParams(16)
    psi0 = ground_state(params, 5.0).state
    sched = QuenchSchedule.linear(1.0)
    cums = []
    for chi in (4, 8, 16):
        _, trace = evolve(psi0, sched, params, TEBDConfig(chi_max=chi))
        assert np.all(np.diff(trace.cumulative_truncation) >= 0)
        cums.append(trace.cumulative_truncation[-1])
    assert cums[0] >= cums[1] >= cums[2]


def test_budget_exceeded():
    params = ModelParams(16)
    psi0 = ground_state(params, 5.0).state
    with pytest.raises(BudgetExceededError):
        evolve(psi0, QuenchSchedule.linear(1.0), params, TEBDConfig(chi_max=2, budget=1e-6))


def test_observer_snapshots():
    params = ModelParams(6)
    psi0 = ground_state(params, 5.0).state
    sched = QuenchSchedule.linear(0.2)  # 50 steps
    _, trace = evolve(psi0, sched, params, TEBDConfig(record_observables_every=10),
                      observer=lambda s: {"f_q": qfi_density(s)})
    assert [round(s["time"], 10) for s in trace.snapshots] == [round(-0.8 + 0.2 * i, 10) for i in range(1, 6)]


def test_checkpoint_resume(tmp_path):
    params = ModelParams(8)
    psi0 = ground_state(params, 5.0).state
    sched = QuenchSchedule.linear(0.4)  # 100 steps
    full, _ = evolve(psi0, sched, params, TEBDConfig(chi_max=16))
    cfg = TEBDConfig(chi_max=16, checkpoint_every=30, checkpoint_dir=str(tmp_path))
    evolve(psi0, sched, params, cfg)
    assert (tmp_path / "checkpoint_state.npz").exists()
    resumed, trace = evolve(psi0, sched, params, cfg, resume=True)
    assert abs(np.vdot(full.to_dense(), resumed.to_dense())) == pytest.approx(1.0, abs=1e-12)
    assert len(trace.times) == 101


def test_trace_roundtrip(tmp_path):
    tr = EvolutionTrace()
    tr.append(0.0, 5.0, 0.0, 1)
    tr.append(0.5, 4.5, 1e-12, 3)
    assert EvolutionTrace.from_dict(tr.to_dict()).to_dict() == tr.to_dict()
    tr.write_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "time,g,cum_trunc,max_chi"


def test_wrong_size_state():
    psi0 = ground_state(ModelParams(6), 5.0).state
    with pytest.raises(InvalidArgumentError):
        evolve(psi0, QuenchSchedule.linear(1.0), ModelParams(8), TEBDConfig())


def test_dense_state_capacity():
    from kzqfi.errors import CapacityError

    with pytest.raises(CapacityError):
        DenseState(13, np.zeros(2**13))
