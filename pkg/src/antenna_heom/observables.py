"""Eigenbasis projections, emission fluxes, efficiency ratio and scans."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .network import STATE_LABELS, EigenStructure
from .units import au_to_ns

DEFAULT_PAIRS = (("D-", "D+"), ("Be-", "Be+"))

TRAJECTORY_COLUMNS = (
    "t_ns", "pop_g", "pop_Dm", "pop_Dp", "pop_B", "pop_De", "pop_Bem", "pop_Bep",
    "abs_coh_DmDp", "abs_coh_BemBep", "pop_Q3", "flux_res", "flux_loss", "P_res", "P_loss",
)
SCAN_COLUMNS = ("E_1e8Ha", "tau_ns", "R", "P_res", "P_loss", "status")


class UndefinedRatioError(ValueError):
    """Raised when neither channel emitted anything."""


def _fmt(x):
    return repr(float(x))


def eigen_projection(rho, eig: EigenStructure, pairs=DEFAULT_PAIRS):
    """Populations (in ``STATE_LABELS`` order) and coherences of ``rho``.

    ``rho`` may be a single 8x8 matrix or a stack ``(..., 8, 8)``.
    """
    v = eig.vectors
    r = v.conj().T @ np.asarray(rho) @ v
    order = [eig.index(name) for name in STATE_LABELS]
    pops = np.real(np.diagonal(r, axis1=-2, axis2=-1))[..., order]
    coh = np.stack([r[..., eig.index(a), eig.index(b)] for a, b in pairs], axis=-1)
    return pops, coh


def site_population(rho, site):
    """Excited-state population of ``site`` (1-based), from the site basis."""
    bit = 3 - site
    mask = np.array([(k >> bit) & 1 for k in range(8)], dtype=bool)
    return np.real(np.diagonal(np.asarray(rho), axis1=-2, axis2=-1)[..., mask].sum(axis=-1))


def site_population_eigen(rho, eig: EigenStructure, site):
    """Same as :func:`site_population`, computed through the eigenbasis.

    ``Tr[P rho] = sum_ij (V+ P V)_ji (V+ rho V)_ij``.
    """
    bit = 3 - site
    proj = np.diag([float((k >> bit) & 1) for k in range(8)])
    v = eig.vectors
    p_eig = v.conj().T @ proj @ v
    r_eig = v.conj().T @ np.asarray(rho) @ v
    return np.real(np.einsum("ji,...ij->...", p_eig, r_eig))


def emission_fluxes(rho, ops, rates):
    """Instantaneous emitted-quanta rates ``G Tr[d+ d- rho]`` per channel (a.u.)."""
    rho = np.asarray(rho)
    out = []
    for lower, rate in ((ops.lower_res, rates.res), (ops.lower_guide, rates.loss)):
        occ = lower.conj().T @ lower
        out.append(rate * np.real(np.einsum("ij,...ji->...", occ, rho)))
    return tuple(out)


def cumulative_emission(times_au, flux_res, flux_loss):
    """Trapezoid integrals ``P(t) = int_0^t flux`` on the sample grid."""
    p_res = cumulative_trapezoid(flux_res, times_au, initial=0.0)
    p_loss = cumulative_trapezoid(flux_loss, times_au, initial=0.0)
    return p_res, p_loss


def efficiency_ratio(p_res, p_loss):
    """``R = P_res / (P_res + P_loss)``."""
    total = p_res + p_loss
    if not total > 0:
        raise UndefinedRatioError("efficiency ratio is undefined: no quanta were emitted")
    return float(p_res / total)


@dataclass
class TrajectoryRecord:
    """Observable time series of one run.

    Fluxes are in emitted quanta per ns; ``p_res``/``p_loss`` are quanta.
    """

    times_ns: np.ndarray
    populations: np.ndarray
    coherences: np.ndarray
    site3_population: np.ndarray
    flux_res: np.ndarray
    flux_loss: np.ndarray
    p_res: np.ndarray
    p_loss: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_states(cls, times_au, rhos, eig, ops, rates):
        times_au = np.asarray(times_au, dtype=float)
        rhos = np.asarray(rhos)
        pops, coh = eigen_projection(rhos, eig)
        f_res, f_loss = emission_fluxes(rhos, ops, rates)
        p_res, p_loss = cumulative_emission(times_au, f_res, f_loss)
        per_ns = 1.0 / au_to_ns(1.0)
        return cls(
            times_ns=au_to_ns(times_au),
            populations=pops,
            coherences=coh,
            site3_population=site_population(rhos, 3),
            flux_res=f_res * per_ns,
            flux_loss=f_loss * per_ns,
            p_res=p_res,
            p_loss=p_loss,
            diagnostics=state_diagnostics(rhos),
        )

    def population(self, label):
        return self.populations[:, STATE_LABELS.index(label)]

    @property
    def ratio(self):
        return efficiency_ratio(self.p_res[-1], self.p_loss[-1])

    def rows(self):
        for k in range(len(self.times_ns)):
            yield (
                self.times_ns[k], *self.populations[k],
                abs(self.coherences[k, 0]), abs(self.coherences[k, 1]),
                self.site3_population[k], self.flux_res[k], self.flux_loss[k],
                self.p_res[k], self.p_loss[k],
            )

    def to_csv(self, path=None):
        """Write (or return, when ``path`` is None) the trajectory CSV."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in self.rows():
            writer.writerow([_fmt(x) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def state_diagnostics(rhos):
    """Worst trace, Hermiticity and positivity deviations over a trajectory."""
    rhos = np.asarray(rhos)
    trace = np.real(np.trace(rhos, axis1=-2, axis2=-1))
    herm = np.abs(rhos - np.conj(np.swapaxes(rhos, -1, -2))).max(axis=(-2, -1))
    hermitian = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
    lowest = np.linalg.eigvalsh(hermitian)[..., 0]
    return {
        "max_trace_error": float(np.abs(trace - 1.0).max()),
        "max_hermiticity_error": float(herm.max()),
        "min_eigenvalue": float(lowest.min()),
    }


@dataclass
class ScanResult:
    energies: np.ndarray
    durations: np.ndarray
    r_values: np.ndarray
    p_res: np.ndarray
    p_loss: np.ndarray
    status: list
    metadata: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(s == "ok" for row in self.status for s in row)

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SCAN_COLUMNS)
        for i, e in enumerate(self.energies):
            for j, tau in enumerate(self.durations):
                writer.writerow([_fmt(e), _fmt(tau), _fmt(self.r_values[i, j]),
                                 _fmt(self.p_res[i, j]), _fmt(self.p_loss[i, j]), self.status[i][j]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _scan_cell(args):
    from .simulation import run_trajectory
    config, energy, tau = args
    try:
        result = run_trajectory(config.with_pulse(energy, tau))
        rec = result.record
        p_res, p_loss = float(rec.p_res[-1]), float(rec.p_loss[-1])
        try:
            r = efficiency_ratio(p_res, p_loss)
        except UndefinedRatioError as exc:
            return np.nan, p_res, p_loss, f"undefined: {exc}"
        return r, p_res, p_loss, "ok"
    except Exception as exc:  # recorded per cell, the scan continues
        return np.nan, np.nan, np.nan, f"failed: {type(exc).__name__}: {exc}"


def scan_grid(base_config, energy_grid, duration_grid, workers=1):
    """Run one trajectory per ``(energy, duration)`` cell.

    ``energy_grid`` is in units of 1e-8 hartree and ``duration_grid`` in ns.
    Cells are independent; ``workers > 1`` runs them in a process pool.
    """
    energies = np.asarray(energy_grid, dtype=float)
    durations = np.asarray(duration_grid, dtype=float)
    jobs = [(base_config, e, tau) for e in energies for tau in durations]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_cell, jobs))
    else:
        results = [_scan_cell(job) for job in jobs]
    shape = (len(energies), len(durations))
    r = np.array([x[0] for x in results]).reshape(shape)
    p_res = np.array([x[1] for x in results]).reshape(shape)
    p_loss = np.array([x[2] for x in results]).reshape(shape)
    status = [[results[i * shape[1] + j][3] for j in range(shape[1])] for i in range(shape[0])]
    return ScanResult(energies, durations, r, p_res, p_loss, status, metadata=base_config.summary())
