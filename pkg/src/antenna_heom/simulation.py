"""Assemble and run one simulation from a :class:`RunConfig`."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bath import BathExpansion, expand_correlation, reorganization_energy
from .driving import Pulse, amplitude_for_energy
from .engine import EmissionRates, HeomPropagator, load_checkpoint, save_checkpoint
from .integrate import StepStats, cash_karp
from .network import build_operators, eigenanalyze
from .observables import TrajectoryRecord
from .units import PULSE_ENERGY_UNIT, au_to_ghz, au_to_ns, ghz_to_au, ns_to_au


@dataclass
class Setup:
    """Everything derived from a configuration before integration starts."""

    config: object
    ops: object
    eig: object
    bath: object
    expansion: BathExpansion | None
    reorganization: float
    pulse: Pulse | None
    rates: EmissionRates
    propagator: HeomPropagator
    rho0: np.ndarray
    driven: bool

    def describe(self):
        eig = self.eig
        info = {
            "omega_gB_ghz": float(au_to_ghz(eig.gap("B", "g"))),
            "omega_BD_ghz": float(au_to_ghz(eig.omega_bd())),
            "p_au": float(self.bath.params.p),
            "reorganization_au": float(self.reorganization),
            "eta": float(self.reorganization / eig.omega_bd()) if self.bath.params.p else 0.0,
            "regime": self.expansion.regime if self.expansion is not None else "none",
            "n_cor": self.expansion.n_cor if self.expansion is not None else 0,
            "rates_au": {"res": self.rates.res, "loss": self.rates.loss},
            "propagator": self.propagator.describe(),
        }
        if self.pulse is not None:
            info["pulse"] = {
                "amplitude_au": self.pulse.amplitude,
                "tau_ns": float(au_to_ns(self.pulse.tau_max)),
                "carrier_ghz": float(au_to_ghz(self.pulse.carrier)),
                "energy_1e8ha": self.pulse.energy / PULSE_ENERGY_UNIT,
            }
        return info


@dataclass
class RunResult:
    setup: Setup
    record: TrajectoryRecord
    final_state: np.ndarray
    t_final: float
    stats: StepStats
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def metadata(self):
        rec = self.record
        out = {
            "config": self.setup.config.summary(),
            "derived": self.setup.describe(),
            "steps": {
                "accepted": self.stats.accepted, "rejected": self.stats.rejected,
                "rhs_evaluations": self.stats.evaluations,
                "smallest_step_au": float(self.stats.smallest_step) if self.stats.accepted else None,
                "largest_step_au": float(self.stats.largest_step),
            },
            "diagnostics": rec.diagnostics,
            "P_res": float(rec.p_res[-1]),
            "P_loss": float(rec.p_loss[-1]),
        }
        total = out["P_res"] + out["P_loss"]
        out["R"] = out["P_res"] / total if total > 0 else None
        return out


def effective_mode(config):
    mode = config["mode"]
    if mode == "convergence":
        return config["convergence.base"]
    if mode == "scan":
        return "trajectory"
    return mode


def build_setup(config):
    mode = effective_mode(config)
    driven = mode == "trajectory"
    ops = build_operators(config.network_spec())
    eig = eigenanalyze(ops)

    bath = config.bath_config().calibrated(eig.omega_bd())
    if bath.params.p > 0:
        expansion = expand_correlation(bath)
        lam = reorganization_energy(bath.params) if config["bath.renormalization"] else 0.0
    else:
        expansion, lam = None, 0.0
    ops = ops.with_renormalization(lam)

    omega_gb = eig.gap("B", "g")
    pulse = None
    if driven and config["pulse.enabled"]:
        carrier = omega_gb if config["pulse.carrier_ghz"] == "auto" else float(ghz_to_au(config["pulse.carrier_ghz"]))
        tau = float(ns_to_au(config["pulse.tau_ns"]))
        phase = config["pulse.phase_rad"]
        if config["pulse.energy_1e8ha"] is not None:
            energy = config["pulse.energy_1e8ha"] * PULSE_ENERGY_UNIT
            amplitude = amplitude_for_energy(energy, tau, carrier, phase)
        else:
            amplitude = config["pulse.amplitude_au"]
        pulse = Pulse(amplitude, tau, carrier, phase)
    rates = config.emission_rates() if driven else EmissionRates()

    frame = omega_gb if config["integrator.frame"] == "rotating" else 0.0
    fold_rate = config["integrator.fold_ratio"] * np.abs(np.linalg.eigvalsh(ops.h_system)).max()
    backend = None if config["integrator.backend"] == "auto" else config["integrator.backend"]
    prop = HeomPropagator(ops, expansion, pulse, rates, level=config["integrator.level"],
                          scaled=config["integrator.scaled_ados"], frame_frequency=frame,
                          fold_rate=fold_rate, backend=backend)

    start = config["initial.state"]
    if start == "auto":
        start = "g" if driven else "B"
    v = eig.vector(start)
    rho0 = np.outer(v, v.conj())
    return Setup(config, ops, eig, bath, expansion, lam, pulse, rates, prop, rho0, driven)


def run_trajectory(config, checkpoint_path=None, setup=None):
    """Integrate one configuration and collect its observables.

    ``initial.resume`` (a checkpoint path) continues an earlier run; the
    output grid and the accumulated yields carry over. ``checkpoint_path``
    receives the final hierarchy state.
    """
    setup = setup or build_setup(config)
    prop = setup.propagator
    icfg = config.integrator_config()
    dt = float(ns_to_au(config["output.dt_ns"]))
    n_out = int(np.floor(icfg.t_final / dt + 1e-9))
    grid = dt * np.arange(n_out + 1)
    if abs(grid[-1] - icfg.t_final) <= 1e-9 * dt:
        grid[-1] = icfg.t_final  # rounding in n * dt must not drop the last sample
    else:
        grid = np.append(grid, icfg.t_final)

    t0, offsets = 0.0, (0.0, 0.0)
    y0 = prop.initial_state(setup.rho0)
    resume = config["initial.resume"]
    if resume:
        y0, t0, extra = load_checkpoint(resume, prop)
        offsets = (extra.get("p_res", 0.0), extra.get("p_loss", 0.0))
        if "next_step" in extra:
            icfg = _with_initial_step(icfg, extra["next_step"])
        grid = grid[grid >= t0 - 1e-9 * dt]
        if not len(grid) or abs(grid[0] - t0) > 1e-6 * dt:
            grid = np.concatenate([[t0], grid])

    times, states = [], []

    def observe(t, y):
        times.append(t)
        states.append(prop.to_lab(y[0].copy(), t))

    stats = StepStats()
    started = time.perf_counter()
    y = cash_karp(prop, y0, t0, icfg.t_final, icfg, output_times=grid,
                  breakpoints=prop.breakpoints, observer=observe, stats=stats)
    wall = time.perf_counter() - started

    record = TrajectoryRecord.from_states(times, np.array(states), setup.eig, setup.ops, setup.rates)
    record.p_res = record.p_res + offsets[0]
    record.p_loss = record.p_loss + offsets[1]
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, prop, y, icfg.t_final, extra={
            "next_step": stats.extra.get("next_step"),
            "p_res": float(record.p_res[-1]), "p_loss": float(record.p_loss[-1]),
        })
    return RunResult(setup, record, y, icfg.t_final, stats, wall)


def _with_initial_step(icfg, step):
    from dataclasses import replace
    return replace(icfg, initial_step=float(step))


CONVERGENCE_COLUMNS = ("level", "n_matsubara", "n_ados", "R", "max_dpop", "max_dcoh", "reference")


def run_convergence(config):
    """Rerun at adjacent (level, n_matsubara) settings and compare.

    Each row is compared with the previous row in the sweep (the adjacent
    setting); the first row has no reference.
    """
    level = config["integrator.level"]
    n_mat = config["bath.n_matsubara"]
    levels = (level, level + 1) if config["convergence.levels"] == "auto" else config["convergence.levels"]
    mats = (n_mat,) if config["convergence.n_matsubara"] == "auto" else config["convergence.n_matsubara"]
    rows, records = [], []
    for m in mats:
        previous = None
        for lv in levels:
            cfg = config.update({"integrator.level": int(lv), "bath.n_matsubara": int(m)})
            res = run_trajectory(cfg)
            rec = res.record
            try:
                r = rec.ratio
            except ValueError:
                r = float("nan")
            row = {"level": int(lv), "n_matsubara": int(m), "n_ados": res.setup.propagator.n_ados,
                   "R": r, "max_dpop": float("nan"), "max_dcoh": float("nan"), "reference": ""}
            if previous is not None:
                row.update(_deltas(previous[1], rec))
                row["reference"] = f"level={previous[0]}"
            rows.append(row)
            records.append(rec)
            previous = (lv, rec)
    # Matsubara comparison at the first level
    if len(mats) > 1:
        first = [i for i, row in enumerate(rows) if row["level"] == levels[0]]
        for a, b in zip(first[:-1], first[1:]):
            extra = {"level": rows[b]["level"], "n_matsubara": rows[b]["n_matsubara"],
                     "n_ados": rows[b]["n_ados"], "R": rows[b]["R"],
                     "reference": f"n_matsubara={rows[a]['n_matsubara']}"}
            extra.update(_deltas(records[a], records[b]))
            rows.append(extra)
    return rows


def _deltas(a: TrajectoryRecord, b: TrajectoryRecord):
    if len(a.times_ns) != len(b.times_ns):
        raise ValueError("convergence runs produced different output grids")
    return {
        "max_dpop": float(np.abs(a.populations - b.populations).max()),
        "max_dcoh": float(np.abs(np.abs(a.coherences) - np.abs(b.coherences)).max()),
    }

