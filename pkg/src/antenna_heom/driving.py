"""Sine-squared microwave pulse and its energy normalization."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

#: below this many carrier radians per pulse the (3/16) tau estimate is poor
MANY_CYCLE_THRESHOLD = 50.0


@dataclass(frozen=True)
class Pulse:
    """``E(t) = A sin^2(pi t / tau_max) cos(carrier t + phase)`` on [0, tau_max].

    All quantities in atomic units.
    """

    amplitude: float
    tau_max: float
    carrier: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.tau_max > 0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")

    @property
    def energy(self):
        return pulse_energy(self)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.tau_max)
        return np.where(inside, self.amplitude * np.sin(np.pi * t / self.tau_max) ** 2, 0.0)


def field_value(t, pulse: Pulse):
    t = np.asarray(t, dtype=float)
    return pulse.envelope(t) * np.cos(pulse.carrier * t + pulse.phase)


def _sinc(u):
    # sin(u)/u
    return np.sinc(np.asarray(u) / np.pi)


def _one_minus_cos_over(u):
    # (1 - cos u)/u, smooth through u = 0
    u = np.asarray(u, dtype=float)
    return np.sin(u / 2) * _sinc(u / 2)


def _envelope4_moments(b, tau):
    """Closed forms of int_0^tau sin^4(pi t/tau) {cos, sin}(b t) dt.

    ``sin^4 = 3/8 - cos(a t)/2 + cos(2 a t)/8`` with ``a = 2 pi / tau``;
    every product is reduced to ``sin(u)/u`` or ``(1 - cos u)/u`` of
    ``u = (b +- m a) tau``, which stay finite for few-cycle pulses.
    """
    a = 2.0 * np.pi / tau
    weights = ((0, 3.0 / 8.0), (1, -0.5), (2, 1.0 / 8.0))
    c = s = 0.0
    for m, w in weights:
        if m == 0:
            c += w * tau * _sinc(b * tau)
            s += w * tau * _one_minus_cos_over(b * tau)
        else:
            for sign in (+1, -1):
                u = (b + sign * m * a) * tau
                c += w * 0.5 * tau * _sinc(u)
                s += w * 0.5 * tau * _one_minus_cos_over(u)
    return c, s


def unit_energy(tau_max, carrier, phase=0.0):
    """``int_0^tau sin^4(pi t/tau) cos^2(carrier t + phase) dt``."""
    c, s = _envelope4_moments(2.0 * carrier, tau_max)
    base = 3.0 * tau_max / 8.0
    return 0.5 * base + 0.5 * (np.cos(2 * phase) * c - np.sin(2 * phase) * s)


def pulse_energy(pulse: Pulse):
    """Integrated intensity ``int E(t)^2 dt`` over the pulse support."""
    return float(pulse.amplitude**2 * unit_energy(pulse.tau_max, pulse.carrier, pulse.phase))


def amplitude_for_energy(energy, tau_max, carrier, phase=0.0):
    if not energy > 0:
        raise ValueError(f"pulse energy must be positive, got {energy}")
    if not tau_max > 0:
        raise ValueError(f"pulse duration must be positive, got {tau_max}")
    if carrier * tau_max < MANY_CYCLE_THRESHOLD:
        warnings.warn(
            f"pulse holds only {carrier * tau_max / (2 * np.pi):.1f} carrier cycles",
            RuntimeWarning, stacklevel=2,
        )
    return float(np.sqrt(energy / unit_energy(tau_max, carrier, phase)))
