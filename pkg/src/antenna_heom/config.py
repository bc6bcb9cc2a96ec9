"""Run configuration: a flat ``key = value`` document with dotted keys.

Grammar
-------
* one ``key = value`` per line; ``#`` starts a comment; blank lines ignored
* keys are dotted names from :data:`SCHEMA`; unknown or repeated keys are errors
* lists are comma separated, matrix rows are separated by ``;``
* booleans: ``true``/``false``; missing optional values: ``none``

``bath.regime`` selects a preset (temperature, ``p``, Matsubara count and
hierarchy level) that any explicit key overrides. Values are stored in the
units of the key suffix (GHz, MHz, ns, K, 1e-8 Ha, a.u.); the builders
(:meth:`RunConfig.network_spec`, :meth:`RunConfig.bath_config`, ...) convert
to atomic units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bath import (
    CLASSICAL_TEMPERATURE, QUANTUM_TEMPERATURE, TABLE_GAMMA1, TABLE_GAMMA2, TABLE_OMEGA1,
    TABLE_OMEGA2, TABLE_P_CLASSICAL, TABLE_P_QUANTUM, BathConfig, SpectralDensityParams,
)
from .engine import FOLD_RATIO, EmissionRates
from .integrate import IntegratorConfig
from .network import STATE_LABELS, NetworkSpec, asymmetric_entries
from .units import ns_to_au, rate_mhz_to_au

MODES = ("trajectory", "field_free", "scan", "convergence")

PRESETS = {
    "classical": {
        "bath.temperature_k": CLASSICAL_TEMPERATURE,
        "bath.p_au": TABLE_P_CLASSICAL,
        "bath.n_matsubara": 1,
        "integrator.level": 4,
    },
    "quantum": {
        "bath.temperature_k": QUANTUM_TEMPERATURE,
        "bath.p_au": TABLE_P_QUANTUM,
        "bath.n_matsubara": 10,
        "integrator.level": 5,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the line or override."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


# -- value kinds -------------------------------------------------------------
def _float(text):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if math.isnan(value):
        raise ValueError("NaN is not allowed")
    return value


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _list(conv):
    def parse(text):
        items = [t.strip() for t in text.split(",")]
        if any(not t for t in items):
            raise ValueError(f"empty list element in {text!r}")
        return tuple(conv(t) for t in items)
    return parse


def _matrix(text):
    rows = [r for r in (s.strip() for s in text.split(";")) if r]
    return tuple(_list(_float)(r) for r in rows)


def _optional(conv):
    def parse(text):
        return None if text.lower() == "none" else conv(text)
    return parse


def _auto(conv):
    def parse(text):
        return "auto" if text.lower() == "auto" else conv(text)
    return parse


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _positive(value, key):
    vals = value if isinstance(value, tuple) else (value,)
    if any(v <= 0 for v in vals):
        raise ValueError(f"{key} must be positive")


def _non_negative(value, key):
    vals = value if isinstance(value, tuple) else (value,)
    if any(v < 0 for v in vals):
        raise ValueError(f"{key} must be non-negative")


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(_format(row) for row in value)
        return ", ".join(_format(v) for v in value)
    return str(value)


_DEFAULT_NET = NetworkSpec()

#: key -> (parser, default, check); ``None`` default entries come from presets
SCHEMA = {
    "mode": (_choice(*MODES), "trajectory", None),
    "network.omega_ghz": (_list(_float), _DEFAULT_NET.omega, _positive),
    "network.coupling_ghz": (_matrix, _DEFAULT_NET.coupling, None),
    "network.dipole_sites": (_list(_int), _DEFAULT_NET.dipole_sites, None),
    "network.dipole_moment": (_float, _DEFAULT_NET.dipole_moment, None),
    "network.noise_site": (_int, _DEFAULT_NET.noise_site, None),
    "bath.regime": (_choice(*PRESETS), "classical", None),
    "bath.enabled": (_bool, True, None),
    "bath.temperature_k": (_float, None, _positive),
    "bath.p_au": (_float, None, _non_negative),
    "bath.eta_target": (_optional(_float), None, None),
    "bath.omega1_au": (_float, TABLE_OMEGA1, _positive),
    "bath.gamma1_au": (_float, TABLE_GAMMA1, _positive),
    "bath.omega2_au": (_float, TABLE_OMEGA2, _positive),
    "bath.gamma2_au": (_float, TABLE_GAMMA2, _positive),
    "bath.n_matsubara": (_int, None, _non_negative),
    "bath.renormalization": (_bool, True, None),
    "pulse.enabled": (_bool, True, None),
    "pulse.energy_1e8ha": (_optional(_float), 1.0, None),
    "pulse.amplitude_au": (_optional(_float), None, None),
    "pulse.tau_ns": (_float, 25.0, _positive),
    "pulse.carrier_ghz": (_auto(_float), "auto", _positive),
    "pulse.phase_rad": (_float, 0.0, None),
    "rates.res_mhz": (_float, 10.0, _non_negative),
    "rates.loss_mhz": (_float, 10.0, _non_negative),
    "initial.state": (_auto(_choice(*STATE_LABELS)), "auto", None),
    "initial.resume": (_optional(str), None, None),
    "integrator.rel_tol": (_float, 1e-7, _positive),
    "integrator.abs_tol": (_float, 1e-10, _positive),
    "integrator.initial_step_au": (_float, 1e5, _positive),
    "integrator.max_step_au": (_float, math.inf, _positive),
    "integrator.min_step_au": (_float, 1e-6, _positive),
    "integrator.t_final_ns": (_float, 500.0, _positive),
    "integrator.level": (_int, None, _non_negative),
    "integrator.scaled_ados": (_bool, True, None),
    "integrator.frame": (_choice("rotating", "lab"), "rotating", None),
    "integrator.fold_ratio": (_float, FOLD_RATIO, _positive),
    "integrator.backend": (_choice("auto", "cython", "python"), "auto", None),
    "output.dt_ns": (_float, 0.5, _positive),
    "output.checkpoint": (_bool, False, None),
    "scan.energies_1e8ha": (_list(_float), (1.0, 2.5, 5.0, 10.0, 20.0, 40.0), _positive),
    "scan.durations_ns": (_list(_float), (5.0, 25.0, 50.0, 100.0, 150.0, 200.0, 250.0), _positive),
    "scan.workers": (_int, 1, _positive),
    "convergence.base": (_choice("field_free", "trajectory"), "field_free", None),
    "convergence.levels": (_auto(_list(_int)), "auto", _non_negative),
    "convergence.n_matsubara": (_auto(_list(_int)), "auto", _non_negative),
}

ALIASES = {"network.coupling_mhz": "network.coupling_ghz"}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration; ``values`` maps every schema key."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    # -- derived objects -----------------------------------------------
    def network_spec(self):
        v = self.values
        return NetworkSpec(
            omega=v["network.omega_ghz"], coupling=v["network.coupling_ghz"],
            dipole_sites=v["network.dipole_sites"], dipole_moment=v["network.dipole_moment"],
            noise_site=v["network.noise_site"],
        )

    def spectral_params(self):
        v = self.values
        p = v["bath.p_au"] if v["bath.enabled"] else 0.0
        return SpectralDensityParams(p, v["bath.omega1_au"], v["bath.gamma1_au"],
                                     v["bath.omega2_au"], v["bath.gamma2_au"])

    def bath_config(self):
        """Uncalibrated bath; ``eta_target`` is applied once the gap is known."""
        v = self.values
        eta = v["bath.eta_target"] if v["bath.enabled"] else None
        return BathConfig(self.spectral_params(), v["bath.temperature_k"], v["bath.n_matsubara"], eta)

    def emission_rates(self):
        v = self.values
        return EmissionRates(float(rate_mhz_to_au(v["rates.res_mhz"])), float(rate_mhz_to_au(v["rates.loss_mhz"])))

    def integrator_config(self):
        v = self.values
        return IntegratorConfig(
            rel_tol=v["integrator.rel_tol"], abs_tol=v["integrator.abs_tol"],
            initial_step=v["integrator.initial_step_au"], max_step=v["integrator.max_step_au"],
            min_step=v["integrator.min_step_au"], t_final=float(ns_to_au(v["integrator.t_final_ns"])),
            level=v["integrator.level"], scaled_ados=v["integrator.scaled_ados"],
        )

    # -- derived configs -----------------------------------------------
    def replace(self, **changes):
        """Copy with dotted keys given as ``section__name=value``."""
        updates = {k.replace("__", "."): val for k, val in changes.items()}
        return self.update(updates)

    def update(self, updates):
        unknown = set(updates) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}")
        values = dict(self.values)
        regime = updates.get("bath.regime", values["bath.regime"])
        if regime != values["bath.regime"]:
            if regime not in PRESETS:
                raise ConfigError(f"bath.regime must be one of {', '.join(PRESETS)}, got {regime!r}")
            values.update(PRESETS[regime])
        values.update(updates)
        _validate(values, {})
        return RunConfig(values)

    def with_pulse(self, energy_1e8ha, tau_ns):
        return self.update({
            "mode": "trajectory", "pulse.enabled": True, "pulse.energy_1e8ha": float(energy_1e8ha),
            "pulse.amplitude_au": None, "pulse.tau_ns": float(tau_ns),
        })

    def echo(self):
        """Canonical text form; ``parse_config(cfg.echo()) == cfg``."""
        lines = [f"{key} = {_format(self.values[key])}" for key in SCHEMA]
        return "\n".join(lines) + "\n"

    def summary(self):
        """JSON-safe dict of the resolved values."""
        def safe(x):
            if isinstance(x, tuple):
                return [safe(i) for i in x]
            if isinstance(x, float) and not math.isfinite(x):
                return str(x)
            return x
        return {k: safe(v) for k, v in self.values.items()}


def _split_lines(text, source):
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", f"{source} line {lineno}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", f"{source} line {lineno}")
        entries.append((key, value, f"{source} line {lineno}"))
    return entries


def parse_config(text, overrides=(), source="config"):
    """Parse a configuration document plus ``key=value`` overrides."""
    entries = _split_lines(text, source)
    for k, item in enumerate(overrides, start=1):
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}", f"override {k}")
        key, value = (s.strip() for s in item.split("=", 1))
        entries.append((key, value, f"override {k}"))

    explicit, where = {}, {}
    file_keys = set()
    for key, value, loc in entries:
        scale = 1.0
        if key in ALIASES:
            key, scale = ALIASES[key], 1e-3
        if key not in SCHEMA:
            hint = _closest(key)
            raise ConfigError(f"unknown key {key!r}" + (f" (did you mean {hint!r}?)" if hint else ""), loc)
        from_file = loc.startswith(source)
        if key in file_keys and from_file:
            raise ConfigError(f"key {key!r} given twice (first at {where[key]})", loc)
        if from_file:
            file_keys.add(key)
        parser, _, check = SCHEMA[key]
        try:
            parsed = parser(value)
            if scale != 1.0:
                parsed = tuple(tuple(x * scale for x in row) for row in parsed)
            if check is not None and parsed not in (None, "auto"):
                check(parsed, key)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", loc) from None
        explicit[key] = parsed
        where[key] = loc

    regime = explicit.get("bath.regime", SCHEMA["bath.regime"][1])
    values = {key: default for key, (_, default, _) in SCHEMA.items()}
    values.update(PRESETS[regime])
    values.update(explicit)

    energy = explicit.get("pulse.energy_1e8ha")
    amplitude = explicit.get("pulse.amplitude_au")
    if energy is not None and amplitude is not None:
        raise ConfigError(
            "give either pulse.energy_1e8ha or pulse.amplitude_au, not both",
            f"{where['pulse.energy_1e8ha']} and {where['pulse.amplitude_au']}",
        )
    if amplitude is not None:
        values["pulse.energy_1e8ha"] = None
    _validate(values, where)
    return RunConfig(values)


def _validate(values, where):
    def fail(message, *keys):
        locs = [where[k] for k in keys if k in where]
        raise ConfigError(message, " and ".join(locs) if locs else None)

    coupling = np.asarray(values["network.coupling_ghz"], dtype=float)
    if coupling.shape != (3, 3):
        fail(f"network.coupling_ghz must be a 3x3 matrix, got shape {coupling.shape}", "network.coupling_ghz")
    bad = asymmetric_entries(coupling)
    if bad:
        fail("network.coupling_ghz is not symmetric: " + ", ".join(bad), "network.coupling_ghz")
    if len(values["network.omega_ghz"]) != 3:
        fail("network.omega_ghz needs 3 entries", "network.omega_ghz")
    try:
        NetworkSpec(
            omega=values["network.omega_ghz"], coupling=values["network.coupling_ghz"],
            dipole_sites=values["network.dipole_sites"], dipole_moment=values["network.dipole_moment"],
            noise_site=values["network.noise_site"],
        )
    except ValueError as exc:
        fail(str(exc), "network.coupling_ghz", "network.dipole_sites", "network.noise_site")
    eta = values["bath.eta_target"]
    if eta is not None and eta < 0:
        fail("bath.eta_target must be non-negative", "bath.eta_target")
    energy, amplitude = values["pulse.energy_1e8ha"], values["pulse.amplitude_au"]
    if energy is not None and amplitude is not None:
        fail("give either pulse.energy_1e8ha or pulse.amplitude_au, not both",
             "pulse.energy_1e8ha", "pulse.amplitude_au")
    if values["pulse.enabled"] and energy is None and amplitude is None:
        fail("an enabled pulse needs pulse.energy_1e8ha or pulse.amplitude_au")
    if energy is not None and energy <= 0:
        fail("pulse.energy_1e8ha must be positive", "pulse.energy_1e8ha")
    if values["integrator.level"] < 0:
        fail("integrator.level must be >= 0", "integrator.level")
    # scan cells set their own duration; field-free runs have no pulse
    uses_pulse = values["mode"] == "trajectory" or (
        values["mode"] == "convergence" and values["convergence.base"] == "trajectory")
    if uses_pulse and values["pulse.enabled"] and values["pulse.tau_ns"] > values["integrator.t_final_ns"]:
        fail("pulse.tau_ns exceeds integrator.t_final_ns", "pulse.tau_ns", "integrator.t_final_ns")


def _closest(key):
    import difflib
    match = difflib.get_close_matches(key, list(SCHEMA), n=1)
    return match[0] if match else None


def load_config(path, overrides=()):
    with open(path) as fh:
        return parse_config(fh.read(), overrides, source=str(path))


def default_config(**changes):
    """Resolved defaults, optionally modified (``section__name=value``)."""
    cfg = parse_config("")
    return cfg.replace(**changes) if changes else cfg
