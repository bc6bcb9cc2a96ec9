"""Adaptive Cash-Karp Runge-Kutta 4(5) integration.

Steps are clipped so that every output time and every breakpoint (for
instance the end of a pulse) is hit exactly; samples are therefore exact
integrator states, not interpolants.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .units import ns_to_au

# Cash & Karp (1990) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    def __init__(self, message, t=None, error=None):
        super().__init__(message)
        self.t = t
        self.error = error


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    initial_step: float = 1e5
    max_step: float = np.inf
    min_step: float = 1e-6
    t_final: float = float(ns_to_au(500.0))
    level: int = 4
    scaled_ados: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be positive")
        if self.level < 0:
            raise ValueError(f"hierarchy level must be >= 0, got {self.level}")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    smallest_step: float = np.inf
    largest_step: float = 0.0
    extra: dict = field(default_factory=dict)


def cash_karp(fun, y0, t0, t_end, cfg: IntegratorConfig, output_times=(), breakpoints=(),
              observer=None, stats=None):
    """Integrate ``dy/dt = fun(t, y, out)`` from ``t0`` to ``t_end``.

    ``fun`` writes the derivative into ``out`` and returns it. ``observer``
    is called as ``observer(t, y)`` at ``t0`` when it is an output time and
    at every later output time. Returns the final state.
    """
    stats = stats if stats is not None else StepStats()
    y = np.array(y0, copy=True)
    k = [np.empty_like(y) for _ in range(6)]
    tmp = np.empty_like(y)
    t = float(t0)

    outputs = sorted(set(float(x) for x in output_times))
    stops, is_output = _merge_stops(t, float(t_end), outputs, breakpoints)
    if observer is not None and outputs and _close(outputs[0], t):
        observer(t, y)

    h = min(cfg.initial_step, cfg.max_step)
    stop_idx = 0
    while stop_idx < len(stops):
        target = stops[stop_idx]
        if t >= target:
            stop_idx += 1
            continue
        h_try = min(h, target - t, cfg.max_step)
        clipped = h_try < h
        while True:
            if h_try < cfg.min_step:
                raise IntegrationError(f"step size underflow at t={t:.6g} (h={h_try:.3g})", t=t)
            err = _step(fun, t, y, h_try, k, tmp, cfg)
            stats.evaluations += 6
            if not np.isfinite(err):
                raise IntegrationError(f"non-finite state encountered at t={t:.6g}", t=t, error=err)
            if err <= 1.0:
                break
            stats.rejected += 1
            factor = max(MIN_FACTOR, SAFETY * err ** -0.2)
            h_try *= factor
            clipped = False
        t_new = target if h_try == target - t else t + h_try
        y, tmp = tmp, y
        t = t_new
        stats.accepted += 1
        stats.smallest_step = min(stats.smallest_step, h_try)
        stats.largest_step = max(stats.largest_step, h_try)

        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
        proposal = h_try * factor
        # a step shortened only to land on a stop says nothing about the scale
        h = max(h, proposal) if clipped else proposal
        if t == target:
            if observer is not None and is_output[stop_idx]:
                observer(t, y)
            stop_idx += 1
    stats.extra["next_step"] = float(h)
    return y


def _close(a, b):
    return abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1.0)


def _merge_stops(t0, t_end, outputs, breakpoints):
    """Sorted stop times in ``(t0, t_end]``; coinciding stops are merged.

    Stops equal to relative precision would otherwise leave a step far
    below any sensible minimum. A merged stop keeps the breakpoint time
    and fires the observer if any of its members is an output time.
    """
    tagged = [(float(b), 0, False) for b in breakpoints if t0 < b < t_end]
    tagged += [(x, 1, True) for x in outputs if x > t0 and not _close(x, t0) and x <= t_end]
    tagged.append((t_end, 2, False))
    tagged.sort()
    stops, flags = [], []
    for time_, kind, output in tagged:
        if stops and _close(stops[-1], time_):
            flags[-1] = flags[-1] or output
            if kind == 2:
                stops[-1] = t_end
            continue
        stops.append(time_)
        flags.append(output)
    return stops, flags


def _step(fun, t, y, h, k, out, cfg):
    """One Cash-Karp step; the 5th-order result lands in ``out``."""
    fun(t, y, k[0])
    for i in range(1, 6):
        np.copyto(out, y)
        for j, a in enumerate(_A[i]):
            if a:
                out += (h * a) * k[j]
        fun(t + _C[i] * h, out, k[i])
    err_vec = np.zeros_like(y)
    np.copyto(out, y)
    for i in range(6):
        if _B5[i]:
            out += (h * _B5[i]) * k[i]
        if _E[i]:
            err_vec += (h * _E[i]) * k[i]
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(out))
    return float(np.max(np.abs(err_vec) / scale))
