"""Transverse-field Ising chain: parameters, quench schedules and Trotter gates.

    H(t) = -J sum_n sz_n sz_{n+1} - g(t) sum_n sx_n

with open boundaries on the MPS path.  Units: J = hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .errors import InvalidArgumentError
from .linalg import hermitian_expm

J = 1.0
HBAR = 1.0
G_CRITICAL = 1.0

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

# floating-point slack when counting Trotter steps (5*tau/0.02 must give exactly 250*tau)
_STEP_SLACK = 1e-9


@dataclass(frozen=True)
class ModelParams:
    N: int
    boundary: str = "open"
    J: float = J
    hbar: float = HBAR

    def __post_init__(self):
        if int(self.N) < 1:
            raise InvalidArgumentError(f"N must be positive, got {self.N}")
        if self.boundary not in ("open", "antiperiodic"):
            raise InvalidArgumentError(f"unknown boundary {self.boundary!r}")
        if self.J != J or self.hbar != HBAR:
            raise InvalidArgumentError("only J = hbar = 1 is supported")


@dataclass(frozen=True)
class QuenchSchedule:
    """Transverse field ramp crossing g_c = 1 at t = 0.

    ``shape="linear"``:  g(t) = 1 - t/tau_q
    ``shape="power"``:   g(t) = 1 - sgn(t) |t/tau_q|**alpha
    The window [t_start, t_end] is fixed by g(t_start) = g_start, g(t_end) = g_end.
    A constant field (``shape="constant"``) over ``duration`` is also allowed for
    stationarity checks.
    """

    shape: str = "linear"
    tau_q: float = 1.0
    alpha: float = 1.0
    g_start: float = 5.0
    g_end: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.shape not in ("linear", "power", "constant"):
            raise InvalidArgumentError(f"unknown schedule shape {self.shape!r}")
        if self.shape == "constant":
            if self.g_start != self.g_end:
                raise InvalidArgumentError("constant schedule needs g_start == g_end")
            if self.duration <= 0:
                raise InvalidArgumentError("constant schedule needs a positive duration")
            return
        if not self.tau_q > 0:
            raise InvalidArgumentError(f"tau_q must be positive, got {self.tau_q}")
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if self.shape == "linear" and self.alpha != 1.0:
            raise InvalidArgumentError("linear schedule has alpha = 1")
        if not self.g_start >= G_CRITICAL >= self.g_end or self.g_start == self.g_end:
            raise InvalidArgumentError("schedule must run from g_start >= 1 down to g_end <= 1")

    @classmethod
    def linear(cls, tau_q, g_start=5.0, g_end=0.0):
        return cls("linear", float(tau_q), 1.0, float(g_start), float(g_end))

    @classmethod
    def power(cls, tau_q, alpha, g_start=5.0, g_end=0.0):
        return cls("power", float(tau_q), float(alpha), float(g_start), float(g_end))

    @classmethod
    def constant(cls, g, duration):
        return cls("constant", 1.0, 1.0, float(g), float(g), float(duration))

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.shape != "constant":
            d.pop("duration")
        return d

    @property
    def t_start(self) -> float:
        if self.shape == "constant":
            return 0.0
        return -((self.g_start - 1.0) ** (1.0 / self.alpha)) * self.tau_q

    @property
    def t_end(self) -> float:
        if self.shape == "constant":
            return self.duration
        return ((1.0 - self.g_end) ** (1.0 / self.alpha)) * self.tau_q

    def __call__(self, t: float) -> float:
        return field_at(self, t)


def field_at(schedule: QuenchSchedule, t: float) -> float:
    t0, t1 = schedule.t_start, schedule.t_end
    slack = 1e-12 * max(1.0, abs(t0), abs(t1))
    if not (t0 - slack <= t <= t1 + slack):
        raise InvalidArgumentError(f"t={t} outside schedule window [{t0}, {t1}]")
    if schedule.shape == "constant":
        return schedule.g_start
    # endpoints are returned exactly, not through the power law
    if t <= t0:
        return schedule.g_start
    if t >= t1:
        return schedule.g_end
    x = t / schedule.tau_q
    if schedule.shape == "linear":
        return 1.0 - x
    return 1.0 - math.copysign(abs(x) ** schedule.alpha, x)


def spectrum_epsilon_k(g: float, k: float) -> float:
    """Positive quasiparticle branch sqrt((g - cos k)^2 + sin^2 k) (per unit of 2J)."""
    return math.sqrt((g - math.cos(k)) ** 2 + math.sin(k) ** 2)


def antiperiodic_momenta(N: int) -> np.ndarray:
    """k = +-pi(2m-1)/N, m = 1..N/2, sorted ascending."""
    if N < 2 or N % 2:
        raise InvalidArgumentError(f"antiperiodic momentum grid needs even N >= 2, got {N}")
    kp = np.pi * (2 * np.arange(1, N // 2 + 1) - 1) / N
    return np.concatenate([-kp[::-1], kp])


# ---------------------------------------------------------------- Trotter gates


def field_weights(N: int, bond: int) -> tuple[float, float]:
    """Share of the site fields carried by ``bond``: 1/2 in the bulk, 1 on the chain ends."""
    wl = 1.0 if bond == 0 else 0.5
    wr = 1.0 if bond == N - 2 else 0.5
    return wl, wr


def bond_hamiltonian(N: int, bond: int, g: float) -> np.ndarray:
    """4x4 bond term -sz sz - g (wl sx x 1 + wr 1 x sx)."""
    if N < 2 or not 0 <= bond < N - 1:
        raise InvalidArgumentError(f"bond {bond} invalid for N={N}")
    wl, wr = field_weights(N, bond)
    return -J * np.kron(SZ, SZ) - g * (wl * np.kron(SX, ID2) + wr * np.kron(ID2, SX))


def full_hamiltonian_dense(N: int, g: float) -> np.ndarray:
    """Dense 2^N x 2^N open-chain Hamiltonian (site 0 is the most significant bit)."""
    H = np.zeros((2**N, 2**N), dtype=complex)
    for b in range(N - 1):
        H += np.kron(np.kron(np.eye(2**b), bond_hamiltonian(N, b, g)), np.eye(2 ** (N - b - 2)))
    return H


def bond_gate(N: int, bond: int, g: float, tau: float) -> np.ndarray:
    """exp(-i tau h_bond(g))."""
    return hermitian_expm(bond_hamiltonian(N, bond, g), -1j * tau)


def layer_gates(N: int, bonds, g: float, tau: float) -> list[np.ndarray]:
    """Gates exp(-i tau h_b(g)) for ``bonds``; bulk bonds share one matrix."""
    cache = {}
    out = []
    for b in bonds:
        key = field_weights(N, b)
        if key not in cache:
            cache[key] = bond_gate(N, b, g, tau)
        out.append(cache[key])
    return out


def even_bonds(N: int) -> list[int]:
    return list(range(0, N - 1, 2))


def odd_bonds(N: int) -> list[int]:
    return list(range(1, N - 1, 2))


@dataclass
class GateLayer:
    """Gates on mutually disjoint bonds; ``sweep`` is the order they are applied in."""

    bonds: list[int]
    gates: list[np.ndarray]
    sweep: str = "right"  # "right": increasing bond index, "left": decreasing
    step: int = -1  # index of the Trotter step this layer completes, -1 if none
    t: float = float("nan")  # time reached once the step completes

    def ordered(self):
        pairs = list(zip(self.bonds, self.gates))
        return pairs if self.sweep == "right" else pairs[::-1]


def trotter_step_layers(N: int, g: float, dt: float) -> list[GateLayer]:
    """Second-order splitting exp(-i dt/2 A) exp(-i dt B) exp(-i dt/2 A) of one step.

    A = even bonds, B = odd bonds.
    """
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    ev, od = even_bonds(N), odd_bonds(N)
    half = layer_gates(N, ev, g, dt / 2)
    return [
        GateLayer(ev, half, "right"),
        GateLayer(od, layer_gates(N, od, g, dt), "left"),
        GateLayer(ev, half, "right"),
    ]


def step_count(schedule: QuenchSchedule, dt: float) -> int:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    T = schedule.t_end - schedule.t_start
    return max(1, math.ceil(T / dt - _STEP_SLACK))


def gate_sequence(schedule: QuenchSchedule, N: int, dt: float) -> Iterator[GateLayer]:
    """Layers of the full Trotterized quench.

    Uses ``n = ceil(T/dt)`` steps of length ``T/n`` so the run ends exactly at
    ``t_end``; g is frozen at each step's midpoint.  The trailing half even layer
    of step i and the leading one of step i+1 act on the same disjoint bonds and
    are fused into one layer.  The layer after which per-step bookkeeping
    happens carries the step index: the odd layer for intermediate steps (the
    state then still owes half an even layer), the trailing layer for the last.
    """
    n = step_count(schedule, dt)
    t0 = schedule.t_start
    h = (schedule.t_end - t0) / n
    ev, od = even_bonds(N), odd_bonds(N)

    def half_even(g):
        return layer_gates(N, ev, g, h / 2)

    def fuse(first, second):
        cache = {}
        out = []
        for a, b in zip(first, second):
            key = (id(a), id(b))
            if key not in cache:
                cache[key] = b @ a
            out.append(cache[key])
        return out

    pending = None
    for i in range(n):
        g = field_at(schedule, t0 + (i + 0.5) * h)
        lead = half_even(g)
        if pending is None:
            yield GateLayer(ev, lead, "right")
        elif od:
            yield GateLayer(ev, fuse(pending, lead), "right")
        else:
            # two-site chain: the fused layer is the only place step i-1 ends
            yield GateLayer(ev, fuse(pending, lead), "right", step=i - 1, t=t0 + i * h)
        if od:
            # the last step is completed by the trailing half layer instead
            tag = i if i < n - 1 else -1
            yield GateLayer(od, layer_gates(N, od, g, h), "left", step=tag, t=t0 + (i + 1) * h)
        pending = lead
    yield GateLayer(ev, pending, "right", step=n - 1, t=schedule.t_end)


def step_midpoint_fields(schedule: QuenchSchedule, dt: float) -> np.ndarray:
    n = step_count(schedule, dt)
    h = (schedule.t_end - schedule.t_start) / n
    return np.array([field_at(schedule, schedule.t_start + (i + 0.5) * h) for i in range(n)])
