"""Run orchestration: resolved configs, single runs, resumable sweeps, fits.

A config is a flat mapping of dotted key paths (``"tebd.chi_max"``) to
values.  Files are JSON and may be written flat or nested.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import extrapolated_power_law, finite_size_extrapolate, kz_predict, power_law_fit
from .dmrg import DMRGConfig, ground_state
from .errors import BudgetExceededError, CapacityError, KZQFIError, SchemaError
from .model import ModelParams, QuenchSchedule
from .observables import (
    RECORD_COLUMNS,
    ObservableRecord,
    measure,
    write_profile_csv,
    write_records_csv,
)
from .oracles import DENSE_MAX_SITES, defect_density_ff, dense_observables, dense_quench
from .tebd import TEBDConfig, evolve

log = logging.getLogger(__name__)

DEFAULTS = {
    "model.N": 16,
    "schedule.shape": "linear",
    "schedule.alpha": 1.0,
    "schedule.tau_q": 1.0,
    "schedule.g_start": 5.0,
    "schedule.g_end": 0.0,
    "dmrg.chi_max": 100,
    "dmrg.svd_eps": 1e-12,
    "dmrg.max_sweeps": 20,
    "dmrg.energy_tol": 1e-10,
    "tebd.dt": 0.02,
    "tebd.chi_max": 100,
    "tebd.svd_eps": 1e-11,
    "tebd.budget": 1e-3,
    "tebd.checkpoint_every": None,
    "tebd.chi_escalations": 0,
    "tebd.refine_dt": False,
    "ff.N": "thermodynamic",
    "ff.ode_tol": 1e-10,
    "engine": "mps",
    "output_dir": "runs/default",
    "seed": 0,
}

AXIS_ALIASES = {"N": "model.N", "tau_q": "schedule.tau_q", "alpha": "schedule.alpha"}

_INT_KEYS = {"model.N", "dmrg.chi_max", "dmrg.max_sweeps", "tebd.chi_max", "tebd.chi_escalations", "seed"}
_FLOAT_KEYS = {k for k, v in DEFAULTS.items() if isinstance(v, float)}

# refine_dt stops once f_Q moves by less than this between dt and dt/2
REFINE_TOL = 1e-4
REFINE_MAX_HALVINGS = 3


# ------------------------------------------------------------------- config


def flatten(d, prefix="") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(*layers) -> dict:
    """Merge defaults with each mapping in ``layers`` (later wins) and validate."""
    cfg = dict(DEFAULTS)
    for layer in layers:
        if not layer:
            continue
        for key, val in flatten(layer).items():
            key = AXIS_ALIASES.get(key, key)
            if key not in DEFAULTS:
                raise SchemaError(f"unknown config key {key!r}")
            cfg[key] = val
    for key in _INT_KEYS:
        try:
            cfg[key] = int(cfg[key])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{key}: expected an integer, got {cfg[key]!r}") from exc
    for key in _FLOAT_KEYS:
        try:
            cfg[key] = float(cfg[key])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{key}: expected a number, got {cfg[key]!r}") from exc
    if cfg["tebd.checkpoint_every"] is not None:
        cfg["tebd.checkpoint_every"] = int(cfg["tebd.checkpoint_every"])
    if cfg["engine"] not in ("mps", "dense", "ff"):
        raise SchemaError(f"engine: expected one of mps, dense, ff, got {cfg['engine']!r}")
    if cfg["ff.N"] != "thermodynamic":
        cfg["ff.N"] = int(cfg["ff.N"])
    if cfg["engine"] == "dense" and cfg["model.N"] > DENSE_MAX_SITES:
        raise CapacityError(f"model.N: dense engine handles at most {DENSE_MAX_SITES} sites")
    schedule_from_config(cfg)  # validates schedule.*
    return cfg


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def schedule_from_config(cfg) -> QuenchSchedule:
    alpha = float(cfg["schedule.alpha"])
    shape = cfg["schedule.shape"]
    # an alpha != 1 axis on a linear base config means a power-law ramp
    if shape == "linear" and alpha != 1.0:
        shape = "power"
    try:
        if shape == "linear":
            return QuenchSchedule.linear(cfg["schedule.tau_q"], cfg["schedule.g_start"], cfg["schedule.g_end"])
        if shape == "power":
            return QuenchSchedule.power(cfg["schedule.tau_q"], alpha, cfg["schedule.g_start"], cfg["schedule.g_end"])
    except KZQFIError as exc:
        raise SchemaError(f"schedule: {exc}") from exc
    raise SchemaError(f"schedule.shape: expected linear or power, got {shape!r}")


def dmrg_config(cfg) -> DMRGConfig:
    return DMRGConfig(chi_max=cfg["dmrg.chi_max"], svd_eps=cfg["dmrg.svd_eps"],
                      max_sweeps=cfg["dmrg.max_sweeps"], energy_tol=cfg["dmrg.energy_tol"],
                      seed=cfg["seed"])


def tebd_config(cfg, out_dir=None) -> TEBDConfig:
    every = cfg["tebd.checkpoint_every"]
    return TEBDConfig(dt=cfg["tebd.dt"], chi_max=cfg["tebd.chi_max"], svd_eps=cfg["tebd.svd_eps"],
                      budget=cfg["tebd.budget"], checkpoint_every=every,
                      checkpoint_dir=str(Path(out_dir) / "checkpoint") if every else None)


# ---------------------------------------------------------------- single run


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, cfg, status, files, started, extra=None):
    manifest = {
        "status": status,
        "config": cfg,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "files": {name: _sha256(out / name) for name in files if (out / name).exists()},
    }
    if extra:
        manifest.update(extra)
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    tmp.replace(out / "manifest.json")
    return manifest


def _run_mps(cfg, out):
    N = cfg["model.N"]
    params = ModelParams(N)
    sched = schedule_from_config(cfg)
    gs = ground_state(params, sched.g_start, dmrg_config(cfg))
    tcfg = tebd_config(cfg, out)
    escalations = cfg["tebd.chi_escalations"]
    while True:
        try:
            psi, trace = evolve(gs.state, sched, params, tcfg, resume=tcfg.checkpoint_every is not None)
            break
        except BudgetExceededError:
            if escalations <= 0:
                raise
            escalations -= 1
            log.warning("truncation budget hit at chi_max=%d; retrying with %d", tcfg.chi_max, 2 * tcfg.chi_max)
            tcfg = TEBDConfig(**{**tcfg.__dict__, "chi_max": 2 * tcfg.chi_max, "checkpoint_every": None,
                                 "checkpoint_dir": None})
    rec = measure(psi, tau_q=sched.tau_q, alpha=sched.alpha, engine="mps", chi_max=tcfg.chi_max, dt=tcfg.dt)
    if cfg["tebd.refine_dt"]:
        dt = tcfg.dt
        for _ in range(REFINE_MAX_HALVINGS):
            dt /= 2
            fine_cfg = TEBDConfig(**{**tcfg.__dict__, "dt": dt, "checkpoint_every": None, "checkpoint_dir": None})
            psi, trace = evolve(gs.state, sched, params, fine_cfg)
            finer = measure(psi, tau_q=sched.tau_q, alpha=sched.alpha, engine="mps", chi_max=tcfg.chi_max, dt=dt)
            converged = abs(finer.f_q - rec.f_q) < REFINE_TOL
            rec = finer
            if converged:
                break
    trace.write_csv(out / "trace.csv")
    return rec, {"dmrg_energy": gs.energy, "saturated_gates": trace.saturated_gates}


def _run_dense(cfg, out):
    sched = schedule_from_config(cfg)
    state = dense_quench(cfg["model.N"], sched, cfg["tebd.dt"])
    obs = dense_observables(state)
    rec = ObservableRecord(N=state.N, tau_q=sched.tau_q, alpha=sched.alpha, f_q=obs["f_q"], n_d=obs["n_d"],
                           mean_sz=obs["mean_sz"], C_z=obs["C_z"], engine="dense", chi_max=None,
                           dt=cfg["tebd.dt"], cum_trunc=0.0, mean_term=obs["mean_term"])
    return rec, {}


def _run_ff(cfg, out):
    sched = schedule_from_config(cfg)
    n_d = defect_density_ff(sched, cfg["ff.N"], cfg["ff.ode_tol"])
    N = None if cfg["ff.N"] == "thermodynamic" else cfg["ff.N"]
    rec = ObservableRecord(N=N, tau_q=sched.tau_q, alpha=sched.alpha, f_q=None, n_d=n_d, mean_sz=None,
                           engine="ff")
    return rec, {}


_ENGINES = {"mps": _run_mps, "dense": _run_dense, "ff": _run_ff}


def run_single(config) -> ObservableRecord:
    """Ground state, quench and measurement for one resolved config.

    Writes ``record.csv``, ``profile.csv``, ``trace.csv`` (mps only) and
    ``manifest.json`` into ``output_dir``.
    """
    cfg = resolve_config(config)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    try:
        rec, extra = _ENGINES[cfg["engine"]](cfg, out)
    except KZQFIError as exc:
        status = "budget_exceeded" if isinstance(exc, BudgetExceededError) else "failed"
        _write_manifest(out, cfg, status, [], started, {"error": f"{type(exc).__name__}: {exc}"})
        raise
    write_records_csv(out / "record.csv", [rec])
    files = ["record.csv"]
    if rec.C_z:
        write_profile_csv(out / "profile.csv", rec.C_z)
        files.append("profile.csv")
    if (out / "trace.csv").exists():
        files.append("trace.csv")
    extra["mean_term"] = rec.mean_term
    _write_manifest(out, cfg, "ok", files, started, extra)
    return rec


def read_records_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if v == "" or v is None:
                conv[k] = None
            elif k in ("engine",):
                conv[k] = v
            elif k in ("N", "chi_max"):
                conv[k] = int(float(v))
            else:
                try:
                    conv[k] = float(v)
                except ValueError:
                    conv[k] = v
        out.append(conv)
    return out


def load_record(out_dir) -> dict | None:
    """The record of a finished run directory, or None if it is missing or damaged."""
    out = Path(out_dir)
    mpath = out / "manifest.json"
    if not mpath.exists():
        return None
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError:
        return None
    if manifest.get("status") != "ok":
        return None
    for name, digest in manifest.get("files", {}).items():
        if not (out / name).exists() or _sha256(out / name) != digest:
            return None
    return read_records_csv(out / "record.csv")[0]


# --------------------------------------------------------------------- sweeps


@dataclass
class SweepConfig:
    base: dict
    axes: dict
    max_concurrency: int | None = None
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d) -> "SweepConfig":
        if "axes" not in d:
            raise SchemaError("sweep config needs an 'axes' mapping")
        return cls(d.get("base", {}), d["axes"], d.get("max_concurrency"), d.get("output_dir"))


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    records_csv: Path | None = None
    profiles_csv: Path | None = None


def _fmt_axis(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


def enumerate_cells(sweep: SweepConfig) -> list[tuple[str, dict]]:
    """Cartesian product of the axes in the order given (last axis fastest)."""
    keys = [AXIS_ALIASES.get(k, k) for k in sweep.axes]
    values = list(sweep.axes.values())
    cells = []
    for i, combo in enumerate(itertools.product(*values)):
        label = "__".join(f"{k.split('.')[-1]}={_fmt_axis(v)}" for k, v in zip(keys, combo))
        cells.append((f"cell_{i:04d}__{label}", dict(zip(keys, combo))))
    return cells


def default_concurrency(base_cfg=None) -> int:
    n = os.cpu_count() or 1
    env = os.environ.get("KZQFI_MAX_THREADS")
    if env:
        n = min(n, max(1, int(env)))
    try:
        mem = os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_AVPHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        mem = None
    if mem and base_cfg:
        chi = base_cfg.get("tebd.chi_max", 100)
        per_run = 16 * 64 * base_cfg.get("model.N", 64) * chi * chi * 8  # generous workspace factor
        n = max(1, min(n, int(mem // max(per_run, 1))))
    return n


def _cell_worker(cfg):
    try:
        rec = run_single(cfg)
        return {"ok": True, "row": rec.row()}
    except KZQFIError as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def run_sweep(sweep: SweepConfig, out_dir=None, progress=None) -> SweepResult:
    """Run every cell of the sweep, skipping cells already completed on disk.

    Results are aggregated in enumeration order into ``records.csv`` and
    ``profiles.csv``; failing cells are listed in ``sweep_summary.json``.
    """
    root = Path(out_dir or sweep.output_dir or "runs/sweep")
    root.mkdir(parents=True, exist_ok=True)
    base = flatten(sweep.base)
    cells = enumerate_cells(sweep)
    log.info("sweep: %d cells in %s", len(cells), root)
    configs = {}
    for name, overrides in cells:
        cfg = resolve_config(base, overrides, {"output_dir": str(root / name)})
        configs[name] = cfg

    results: dict[str, dict] = {}
    todo = []
    skipped = []
    for name, _ in cells:
        rec = load_record(root / name)
        if rec is not None and _same_config(root / name, configs[name]):
            results[name] = {"ok": True, "row": rec}
            skipped.append(name)
        else:
            todo.append(name)

    workers = sweep.max_concurrency or default_concurrency(resolve_config(base))
    workers = max(1, min(workers, len(todo) or 1))
    if workers == 1:
        for name in todo:
            results[name] = _cell_worker(configs[name])
            if progress:
                progress(name, results[name])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(_cell_worker, configs[name]): name for name in todo}
            for fut in as_completed(futs):
                name = futs[fut]
                try:
                    results[name] = fut.result()
                except Exception as exc:  # worker crashed outright
                    results[name] = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
                if progress:
                    progress(name, results[name])

    res = SweepResult(skipped=skipped)
    profile_rows = []
    for name, _ in cells:
        r = results[name]
        if r["ok"]:
            res.rows.append(r["row"])
            prof = root / name / "profile.csv"
            if prof.exists():
                with open(prof, newline="", encoding="utf-8") as fh:
                    for p in csv.DictReader(fh):
                        profile_rows.append([r["row"]["N"], r["row"]["tau_q"], r["row"]["alpha"], p["r"], p["c_z"]])
        else:
            res.failed.append({"cell": name, "error": r["error"]})
    res.records_csv = root / "records.csv"
    write_records_csv(res.records_csv, res.rows)
    res.profiles_csv = root / "profiles.csv"
    with open(res.profiles_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "tau_q", "alpha", "r", "c_z"])
        for row in profile_rows:
            w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), row[3], row[4]])
    (root / "sweep_summary.json").write_text(json.dumps(
        {"cells": [n for n, _ in cells], "failed": res.failed, "skipped": skipped}, indent=2))
    return res


def _same_config(cell_dir: Path, cfg) -> bool:
    try:
        manifest = json.loads((cell_dir / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError):
        return False
    return manifest.get("config") == json.loads(json.dumps(cfg))


# ----------------------------------------------------------------------- fits


def _require(rows, columns, path="records"):
    for col in columns:
        if not rows or col not in rows[0]:
            raise SchemaError(f"{path}: missing column {col!r}")
        if any(r[col] is None for r in rows):
            raise SchemaError(f"{path}: column {col!r} has empty cells")


def _filter(rows, alpha=None, tau_q=None, engine=None):
    out = rows
    if alpha is not None:
        out = [r for r in out if r.get("alpha") is not None and math.isclose(r["alpha"], alpha)]
    if tau_q is not None:
        out = [r for r in out if r.get("tau_q") is not None and math.isclose(r["tau_q"], tau_q)]
    if engine is not None:
        out = [r for r in out if r.get("engine") == engine]
    return out


def fit_command(records, mode: str, *, value: str = "f_q", extrapolate: bool = False,
                alpha=None, tau_q=None, engine=None, d=1, nu=1.0, z=1.0) -> dict:
    """Structured fit report.

    ``records`` is a path to an aggregate CSV or a list of row dicts.  In
    ``power-law`` mode with ``extrapolate`` each rate is first extrapolated
    over N and the intercepts are fitted.  Several alphas in one table give
    one report per alpha under ``"by_alpha"``.
    """
    if mode == "kz-predict":
        return kz_predict(d, nu, z, 1.0 if alpha is None else alpha).to_dict()
    path = "records"
    if isinstance(records, (str, Path)):
        path = str(records)
        records = read_records_csv(records)
    rows = _filter(copy.deepcopy(list(records)), alpha, tau_q, engine)
    if not rows:
        raise SchemaError(f"{path}: no rows left after filtering")
    if mode == "finite-size":
        _require(rows, ["N", value], path)
        fit = finite_size_extrapolate([(r["N"], r[value]) for r in rows])
        return fit.to_dict()
    if mode != "power-law":
        raise SchemaError(f"unknown fit mode {mode!r}")
    _require(rows, ["tau_q", value, "alpha"] + (["N"] if extrapolate else []), path)
    alphas = sorted({r["alpha"] for r in rows})
    reports = {}
    for a in alphas:
        sub = [r for r in rows if r["alpha"] == a]
        if extrapolate:
            fit, per_rate = extrapolated_power_law(sub, value)
            rep = fit.to_dict()
            rep["finite_size"] = {repr(t): f.to_dict() for t, f in per_rate.items()}
        else:
            rep = power_law_fit([(r["tau_q"], r[value]) for r in sub]).to_dict()
        rep["alpha"] = a
        reports[a] = rep
    if len(reports) == 1:
        return next(iter(reports.values()))
    return {"by_alpha": {repr(a): rep for a, rep in reports.items()}}


__all__ = [
    "DEFAULTS",
    "RECORD_COLUMNS",
    "SweepConfig",
    "SweepResult",
    "enumerate_cells",
    "fit_command",
    "load_record",
    "read_records_csv",
    "resolve_config",
    "run_single",
    "run_sweep",
]
