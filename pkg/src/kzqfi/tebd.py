"""Real-time TEBD evolution of an MPS through a quench schedule."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import BudgetExceededError, InvalidArgumentError, InvalidInputError, NumericalFailureError
from .model import ModelParams, QuenchSchedule, gate_sequence, step_count
from .mps import MPSState

log = logging.getLogger(__name__)


@dataclass
class TEBDConfig:
    dt: float = 0.02
    chi_max: int = 100
    svd_eps: float = 1e-11
    budget: float = 1e-3
    checkpoint_every: int | None = None
    checkpoint_dir: str | None = None
    record_observables_every: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"tebd.dt must be positive, got {self.dt}")
        if int(self.chi_max) < 2:
            raise InvalidArgumentError(f"tebd.chi_max must be >= 2, got {self.chi_max}")
        if self.svd_eps < 0 or not self.budget > 0:
            raise InvalidArgumentError("tebd.svd_eps must be >= 0 and tebd.budget > 0")
        if self.checkpoint_every is not None and self.checkpoint_dir is None:
            raise InvalidArgumentError("tebd.checkpoint_every needs tebd.checkpoint_dir")


@dataclass
class EvolutionTrace:
    times: list = field(default_factory=list)
    g_values: list = field(default_factory=list)
    cumulative_truncation: list = field(default_factory=list)
    max_bond_dim: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    saturated_gates: int = 0  # gates whose new bond hit chi_max

    def append(self, t, g, cum, chi):
        self.times.append(float(t))
        self.g_values.append(float(g))
        self.cumulative_truncation.append(float(cum))
        self.max_bond_dim.append(int(chi))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "g", "cum_trunc", "max_chi"])
            for row in zip(self.times, self.g_values, self.cumulative_truncation, self.max_bond_dim):
                w.writerow([repr(row[0]), repr(row[1]), repr(row[2]), row[3]])

    def to_dict(self) -> dict:
        return {
            "times": self.times,
            "g_values": self.g_values,
            "cumulative_truncation": self.cumulative_truncation,
            "max_bond_dim": self.max_bond_dim,
            "snapshots": self.snapshots,
            "saturated_gates": self.saturated_gates,
        }

    @classmethod
    def from_dict(cls, d) -> "EvolutionTrace":
        return cls(**d)


def _checkpoint_paths(directory):
    d = Path(directory)
    return d / "checkpoint_state.npz", d / "checkpoint_meta.json"


def _save_checkpoint(directory, psi, step, trace):
    Path(directory).mkdir(parents=True, exist_ok=True)
    state_path, meta_path = _checkpoint_paths(directory)
    tmp_state = state_path.with_suffix(".tmp")
    psi.save(tmp_state)
    tmp_state.replace(state_path)
    tmp_meta = meta_path.with_suffix(".tmp")
    tmp_meta.write_text(json.dumps({"step": step, "trace": trace.to_dict()}))
    tmp_meta.replace(meta_path)


def _load_checkpoint(directory):
    state_path, meta_path = _checkpoint_paths(directory)
    if not (state_path.exists() and meta_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    return MPSState.load(state_path), meta["step"], EvolutionTrace.from_dict(meta["trace"])


def evolve(psi: MPSState, schedule: QuenchSchedule, params: ModelParams, cfg: TEBDConfig,
           observer: Callable[[MPSState], dict] | None = None,
           resume: bool = False) -> tuple[MPSState, EvolutionTrace]:
    """Evolve ``psi`` from ``schedule.t_start`` to ``schedule.t_end``.

    ``observer(psi)`` is called every ``cfg.record_observables_every`` steps (and
    at the end) and its dict return value stored in ``trace.snapshots``.  With
    ``resume=True`` the newest checkpoint in ``cfg.checkpoint_dir`` is picked up.
    """
    N = params.N
    if psi.N != N:
        raise InvalidArgumentError(f"state has {psi.N} sites, model has {N}")
    if abs(psi.norm() - 1.0) > 1e-8:
        raise InvalidInputError(f"initial state not normalized (norm {psi.norm():.12f})")
    n_steps = step_count(schedule, cfg.dt)
    psi = psi.copy()
    trace = EvolutionTrace()
    done = -1
    if resume and cfg.checkpoint_dir:
        ck = _load_checkpoint(cfg.checkpoint_dir)
        if ck is not None:
            psi, done, trace = ck
            log.info("resuming TEBD from step %d of %d", done + 1, n_steps)
    if done < 0:
        trace.append(schedule.t_start, schedule.g_start, psi.cumulative_truncation_error, psi.max_bond_dim)

    chi = int(cfg.chi_max)
    eps = float(cfg.svd_eps)
    every = cfg.record_observables_every
    h = (schedule.t_end - schedule.t_start) / n_steps
    skipping = done >= 0
    for layer in gate_sequence(schedule, N, cfg.dt):
        if skipping:
            if layer.step == done:
                skipping = False
            continue
        for bond, gate in layer.ordered():
            try:
                psi.apply_two_site_gate(gate, bond, chi, eps, direction=layer.sweep, check=False)
            except InvalidInputError as exc:
                raise NumericalFailureError(f"non-finite amplitudes at bond {bond}: {exc}") from exc
            if psi.tensors[bond].shape[2] >= chi:
                trace.saturated_gates += 1
        if layer.step < 0:
            continue
        step = layer.step
        g_mid = schedule(schedule.t_start + (step + 0.5) * h)
        trace.append(layer.t, g_mid, psi.cumulative_truncation_error, psi.max_bond_dim)
        if psi.cumulative_truncation_error > cfg.budget:
            raise BudgetExceededError(
                f"cumulative truncation {psi.cumulative_truncation_error:.3e} exceeds budget "
                f"{cfg.budget:.1e} at t={layer.t:.4f}; raise tebd.chi_max or lower tebd.svd_eps"
            )
        last = step == n_steps - 1
        if observer is not None and (last or (every and (step + 1) % every == 0)):
            snap = dict(observer(psi))
            snap["time"] = layer.t
            trace.snapshots.append(snap)
        if cfg.checkpoint_every and (step + 1) % cfg.checkpoint_every == 0 and not last:
            _save_checkpoint(cfg.checkpoint_dir, psi, step, trace)
    if not np.isfinite(psi.norm()):
        raise NumericalFailureError("final state has non-finite norm")
    psi.normalize()
    return psi, trace
