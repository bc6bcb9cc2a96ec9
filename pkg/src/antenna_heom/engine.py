"""Hierarchical equations of motion with spontaneous-emission channels.

Each ADO obeys

    d rho_n/dt = -i[H(t), rho_n] + i sum_k n_k gamma_k rho_n
                 - i [S, sum_k rho_{n+1_k}]
                 - i sum_k n_k (alpha_k S rho_{n-1_k} - alpha~_k rho_{n-1_k} S)
                 + delta_{n,0} (L_res + L_loss)[rho_n]

with ``C(t) = sum_k alpha_k exp(i gamma_k t)``; ``Im gamma_k > 0`` makes
the drift term damp every ADO above the system row.

Two exact reformulations keep the explicit integrator efficient:

* a rotating frame ``rho -> exp(i w N t) rho exp(-i w N t)`` generated by
  the total excitation number ``N``. ``H_S``, ``S`` and both emission
  channels conserve or shift ``N`` uniformly, so only the drive picks up
  phases, and every population and intra-sector coherence is unchanged.
* optional scaling ``rho_n -> rho_n / sqrt(prod_k n_k! |alpha_k|^n_k)``.

Expansion terms decaying much faster than any system frequency (the
high-temperature Matsubara terms) would make the explicit step size
collapse; they are eliminated adiabatically into the Markovian generator
``-(i/gamma_k) [S, alpha_k S rho - alpha~_k rho S]`` applied to every ADO.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .hierarchy import ABSENT, DEFAULT_MAX_ADOS, enumerate_hierarchy
from .kernels import get_kernel

CHECKPOINT_VERSION = 1

#: expansion terms with a decay rate above this multiple of the largest
#: system frequency are folded into a Markovian correction
FOLD_RATIO = 50.0


@dataclass(frozen=True)
class EmissionRates:
    """Decay rates of the resonator (site 3) and waveguide (sites 1+2) channels, a.u."""

    res: float = 0.0
    loss: float = 0.0


def lindblad_term(rho, lower, rate):
    """``(G/2) [2 d rho d+ - d+ d rho - rho d+ d]`` for lowering operator ``d``."""
    if rate == 0.0:
        return np.zeros_like(rho)
    raise_ = lower.conj().T
    dd = raise_ @ lower
    return 0.5 * rate * (2.0 * lower @ rho @ raise_ - dd @ rho - rho @ dd)


def channel_lowering(ops, channel):
    if channel == "resonator":
        return ops.lower_res
    if channel == "waveguide":
        return ops.lower_guide
    raise ValueError(f"unknown emission channel {channel!r}; expected 'resonator' or 'waveguide'")


class HeomPropagator:
    """Right-hand side of the hierarchy for one system/bath/drive setup.

    Parameters
    ----------
    ops : SystemOperators
        ``ops.h_ren_shift`` (lambda) enters as the counter-term ``lambda S^2``.
    expansion : BathExpansion or None
        ``None`` or an all-zero expansion disables the bath.
    pulse : Pulse or None
    rates : EmissionRates
    level : int
        Truncation level; couplings above it are dropped.
    scaled : bool
        Store rescaled ADOs.
    frame_frequency : float
        Rotating-frame frequency (a.u.); 0 gives the lab frame.
    fold_rate : float, optional
        Decay-rate threshold for adiabatic elimination. Defaults to
        ``FOLD_RATIO`` times the largest system eigenfrequency.
    """

    def __init__(self, ops, expansion=None, pulse=None, rates=EmissionRates(), level=4,
                 scaled=True, frame_frequency=0.0, fold_rate=None, backend=None, threads=None,
                 max_ados=DEFAULT_MAX_ADOS):
        self.ops = ops
        self.expansion = expansion
        self.pulse = pulse
        self.rates = rates
        self.level = int(level)
        self.scaled = bool(scaled)
        self.frame_frequency = float(frame_frequency)
        self.backend, self._kernel = get_kernel(backend, threads)

        s = ops.s_coupling
        if np.count_nonzero(s - np.diag(np.diag(s))):
            raise ValueError("the bath coupling operator must be diagonal in the site basis")
        self.s = np.ascontiguousarray(np.diag(s).real, dtype=float)
        dim = s.shape[0]
        self.dim = dim

        if fold_rate is None:
            fold_rate = FOLD_RATIO * np.abs(np.linalg.eigvalsh(ops.h_system)).max()
        self.fold_rate = float(fold_rate)
        self._select_modes()

        self.index = enumerate_hierarchy(len(self.modes), self.level if len(self.modes) else 0, max_ados)
        self._build_coefficients()
        self._build_hamiltonian()

        self._lower = [ops.lower_res, ops.lower_guide]
        self._rates = [float(rates.res), float(rates.loss)]

    # -- setup ----------------------------------------------------------
    def _select_modes(self):
        exp = self.expansion
        self.modes, self.folded = [], []
        if exp is None:
            return
        for k in range(exp.n_cor):
            if exp.alpha[k] == 0 and exp.alpha_tilde[k] == 0:
                continue
            if exp.gamma[k].imag > self.fold_rate:
                self.folded.append(k)
            else:
                self.modes.append(k)

    def _build_coefficients(self):
        n = self.index.indices
        n_ado, n_cor = n.shape
        s = self.s
        self.plus = np.ascontiguousarray(self.index.plus)
        self.minus = np.ascontiguousarray(self.index.minus)
        self.drift = np.zeros(n_ado, dtype=complex)
        self.cup = np.zeros((n_ado, n_cor))
        self.a = np.zeros((n_ado, n_cor), dtype=complex)
        self.b = np.zeros((n_ado, n_cor), dtype=complex)
        self.weights = np.ones(n_ado)
        if n_cor:
            exp = self.expansion
            alpha = exp.alpha[self.modes]
            alpha_t = exp.alpha_tilde[self.modes]
            gamma = exp.gamma[self.modes]
            self.drift = 1j * (n @ gamma)
            if self.scaled:
                mag = np.abs(alpha)
                mag = np.where(mag > 0, mag, np.abs(alpha_t))
                self.cup = np.sqrt((n + 1) * mag)
                root = np.sqrt(n / mag)
                self.a = root * alpha
                self.b = root * alpha_t
                log_w = 0.5 * (np.sum(_log_factorial(n), axis=1) + n @ np.log(mag))
                self.weights = np.exp(log_w)
            else:
                self.cup = np.ones((n_ado, n_cor))
                self.a = n * alpha
                self.b = n * alpha_t
            self.cup[self.plus == ABSENT] = 0.0

        fold = np.zeros((self.dim, self.dim), dtype=complex)
        if self.folded:
            exp = self.expansion
            si, sj = s[:, None], s[None, :]
            for k in self.folded:
                fold += -(1j / exp.gamma[k]) * (si - sj) * (exp.alpha[k] * si - exp.alpha_tilde[k] * sj)
        self.fold = fold

    def _build_hamiltonian(self):
        ops = self.ops
        h0 = ops.h_system + ops.renormalization_term() - self.frame_frequency * ops.number
        r, c = np.nonzero(np.abs(h0) > 0)
        self._h0 = (r.astype(np.int64), c.astype(np.int64), h0[r, c].astype(complex))
        r, c = np.nonzero(np.abs(ops.dipole_plus) > 0)
        self._dp = (r.astype(np.int64), c.astype(np.int64), ops.dipole_plus[r, c].astype(complex))
        self._h_full_rows = np.concatenate([self._h0[0], self._dp[0], self._dp[1]])
        self._h_full_cols = np.concatenate([self._h0[1], self._dp[1], self._dp[0]])
        n_base = len(self._h0[2])
        n_dip = len(self._dp[2])
        self._h_full_vals = np.concatenate([self._h0[2], np.zeros(2 * n_dip, dtype=complex)])
        self._dip_slice = (slice(n_base, n_base + n_dip), slice(n_base + n_dip, n_base + 2 * n_dip))

    # -- evaluation -----------------------------------------------------
    @property
    def n_ados(self):
        return self.index.size

    @property
    def breakpoints(self):
        return () if self.pulse is None else (self.pulse.tau_max,)

    def field(self, t):
        if self.pulse is None or t < 0 or t > self.pulse.tau_max:
            return 0.0
        p = self.pulse
        return p.amplitude * np.sin(np.pi * t / p.tau_max) ** 2 * np.cos(p.carrier * t + p.phase)

    def hamiltonian_triplets(self, t):
        e = self.field(t)
        if e == 0.0:
            return self._h0
        phase = np.exp(1j * self.frame_frequency * t)
        vals = self._h_full_vals
        vals[self._dip_slice[0]] = -e * phase * self._dp[2]
        vals[self._dip_slice[1]] = -e * np.conj(phase) * np.conj(self._dp[2])
        return self._h_full_rows, self._h_full_cols, vals

    def hamiltonian(self, t):
        """Dense frame Hamiltonian at time ``t`` (for tests and diagnostics)."""
        r, c, v = self.hamiltonian_triplets(t)
        h = np.zeros((self.dim, self.dim), dtype=complex)
        np.add.at(h, (r, c), v)
        return h

    def rhs(self, t, y, out=None):
        if out is None:
            out = np.empty_like(y)
        r, c, v = self.hamiltonian_triplets(t)
        self._kernel(y, out, r, c, v, self.s, self.drift, self.plus, self.minus,
                     self.cup, self.a, self.b, self.fold)
        rho = y[0]
        for lower, rate in zip(self._lower, self._rates):
            if rate:
                out[0] += lindblad_term(rho, lower, rate)
        return out

    __call__ = rhs

    # -- states ---------------------------------------------------------
    def initial_state(self, rho_s):
        y = np.zeros((self.n_ados, self.dim, self.dim), dtype=complex)
        y[0] = rho_s
        return y

    def frame_phases(self, t):
        """Elementwise factors mapping lab-frame rho to rotating-frame rho at ``t``."""
        n = np.real(np.diag(self.ops.number))
        return np.exp(1j * self.frame_frequency * t * (n[:, None] - n[None, :]))

    def to_lab(self, rho, t):
        if self.frame_frequency == 0.0:
            return rho
        return rho * np.conj(self.frame_phases(t))

    def to_frame(self, rho, t):
        if self.frame_frequency == 0.0:
            return rho
        return rho * self.frame_phases(t)

    def physical_ados(self, y):
        """Undo the ADO scaling."""
        return y * self.weights[:, None, None]

    def describe(self):
        return {
            "backend": self.backend,
            "n_ados": self.n_ados,
            "n_modes": len(self.modes),
            "folded_modes": list(self.folded),
            "level": self.level,
            "scaled": self.scaled,
            "frame_frequency_au": self.frame_frequency,
            "hierarchy": self.index.descriptor(),
        }


def _log_factorial(n):
    from scipy.special import gammaln
    return gammaln(np.asarray(n) + 1.0)


def save_checkpoint(path, propagator: HeomPropagator, y, t, extra=None):
    """Versioned JSON dump of a hierarchy state at time ``t``.

    ``extra`` holds JSON-safe bookkeeping (step size, accumulated yields).
    """
    flat = np.asarray(y).ravel()
    payload = {
        "version": CHECKPOINT_VERSION,
        "t_au": float(t),
        "hierarchy": propagator.index.descriptor(),
        "shape": list(np.shape(y)),
        "scaled": propagator.scaled,
        "frame_frequency_au": propagator.frame_frequency,
        "real": flat.real.tolist(),
        "imag": flat.imag.tolist(),
        "extra": dict(extra or {}),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path, propagator: HeomPropagator):
    """Return ``(y, t, extra)`` after checking the state fits ``propagator``."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    if payload["hierarchy"] != propagator.index.descriptor():
        raise ValueError(f"checkpoint hierarchy {payload['hierarchy']} does not match {propagator.index.descriptor()}")
    if payload["scaled"] != propagator.scaled or payload["frame_frequency_au"] != propagator.frame_frequency:
        raise ValueError("checkpoint was written with a different ADO scaling or frame")
    y = (np.array(payload["real"]) + 1j * np.array(payload["imag"])).reshape(payload["shape"])
    return y, payload["t_au"], payload.get("extra", {})
