"""Slow transverse-field Ising quenches with matrix product states.

Prepares the paramagnetic ground state with DMRG, ramps the field through
the critical point with TEBD and measures the quantum Fisher information
density of the order parameter, with free-fermion and state-vector oracles
for cross-checks.
"""

from .analysis import extrapolated_power_law, finite_size_extrapolate, kappa, kz_predict, power_law_fit
from .dmrg import DMRGConfig, ground_state
from .errors import KZQFIError
from .model import ModelParams, QuenchSchedule
from .mps import MPSState
from .observables import entangled_particle_witness, measure, qfi_density
from .tebd import TEBDConfig, evolve

__version__ = "0.1.0"

__all__ = [
    "DMRGConfig",
    "KZQFIError",
    "MPSState",
    "ModelParams",
    "QuenchSchedule",
    "TEBDConfig",
    "entangled_particle_witness",
    "evolve",
    "extrapolated_power_law",
    "finite_size_extrapolate",
    "ground_state",
    "kappa",
    "kz_predict",
    "measure",
    "power_law_fit",
    "qfi_density",
]
