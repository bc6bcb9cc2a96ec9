"""Four-pole Lorentzian bath: spectral density and correlation expansion.

The correlation function uses the ``exp(+i*gamma*t)`` convention,

    C(t) = (1/pi) * integral J(w) n(w) exp(i w t) dw = sum_k alpha_k exp(i gamma_k t),

so every expansion term decays for ``t > 0`` iff ``Im(gamma_k) > 0``.
Terms 1..4 come from the poles ``+-Omega_k + i Gamma_k`` of the spectral
density, the rest from the Matsubara poles ``i nu_m`` of the Bose function.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .units import kelvin_to_au

#: Lorentzian parameters (a.u.) shared by both regimes
TABLE_OMEGA1 = 3.1892e-8
TABLE_GAMMA1 = 2.1191e-7
TABLE_OMEGA2 = 1.5222e-7
TABLE_GAMMA2 = 9.0678e-9
TABLE_P_CLASSICAL = 2.7959e-47
TABLE_P_QUANTUM = 2.7959e-41

CLASSICAL_TEMPERATURE = 298.0
QUANTUM_TEMPERATURE = 0.01


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralDensityParams:
    p: float
    omega1: float = TABLE_OMEGA1
    gamma1: float = TABLE_GAMMA1
    omega2: float = TABLE_OMEGA2
    gamma2: float = TABLE_GAMMA2

    def __post_init__(self):
        for name in ("omega1", "gamma1", "omega2", "gamma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.p < 0:
            raise ValueError(f"p must be non-negative, got {self.p}")

    @classmethod
    def classical(cls):
        return cls(TABLE_P_CLASSICAL)

    @classmethod
    def quantum(cls):
        return cls(TABLE_P_QUANTUM)

    def denominator_roots(self):
        """The eight roots of ``Lambda_1 * Lambda_2``."""
        roots = []
        for om, ga in ((self.omega1, self.gamma1), (self.omega2, self.gamma2)):
            roots += [om + 1j * ga, -om + 1j * ga, om - 1j * ga, -om - 1j * ga]
        return np.array(roots)

    def upper_poles(self):
        """Upper half-plane poles, in the order the conjugation rule assumes."""
        return np.array([
            self.omega1 + 1j * self.gamma1,
            -self.omega1 + 1j * self.gamma1,
            self.omega2 + 1j * self.gamma2,
            -self.omega2 + 1j * self.gamma2,
        ])


@dataclass(frozen=True)
class BathConfig:
    """Bath parameters. ``eta_target`` (if set) overrides ``params.p``
    once :meth:`calibrated` is called with the bright-dark gap."""

    params: SpectralDensityParams
    temperature: float
    n_matsubara: int
    eta_target: float | None = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.n_matsubara < 0:
            raise ValueError(f"n_matsubara must be >= 0, got {self.n_matsubara}")
        if self.eta_target is not None and not self.eta_target >= 0:
            raise ValueError(f"eta_target must be >= 0, got {self.eta_target}")

    @property
    def beta(self):
        return 1.0 / kelvin_to_au(self.temperature)

    def calibrated(self, omega_bd):
        if self.eta_target is None:
            return self
        return replace(self, params=rescale_to_eta(self.params, self.eta_target, omega_bd))


@dataclass(frozen=True)
class BathExpansion:
    alpha: np.ndarray
    alpha_tilde: np.ndarray
    gamma: np.ndarray
    temperature: float
    n_matsubara: int
    regime: str

    @property
    def n_cor(self):
        return len(self.gamma)

    def correlation(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self.gamma)) @ self.alpha

    def correlation_conj(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self.gamma)) @ self.alpha_tilde

    def to_json(self):
        pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
        return json.dumps({
            "version": 1,
            "temperature_k": self.temperature,
            "n_matsubara": self.n_matsubara,
            "regime": self.regime,
            "terms": [
                {"alpha": pair(a), "alpha_tilde": pair(b), "gamma": pair(g)}
                for a, b, g in zip(self.alpha, self.alpha_tilde, self.gamma)
            ],
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        cplx = lambda key: np.array([complex(*t[key]) for t in data["terms"]])  # noqa: E731
        return cls(cplx("alpha"), cplx("alpha_tilde"), cplx("gamma"),
                   data["temperature_k"], data["n_matsubara"], data["regime"])


def spectral_density(omega, params: SpectralDensityParams):
    w = np.asarray(omega, dtype=float)
    lam1 = ((w + params.omega1) ** 2 + params.gamma1**2) * ((w - params.omega1) ** 2 + params.gamma1**2)
    lam2 = ((w + params.omega2) ** 2 + params.gamma2**2) * ((w - params.omega2) ** 2 + params.gamma2**2)
    return params.p * w**3 / (lam1 * lam2)


def _spectral_density_complex(z, params):
    d = np.prod(z - params.denominator_roots())
    return params.p * z**3 / d


def _expm1(z):
    # exp(z) - 1 without cancellation for small complex z
    return 2.0 * np.exp(z / 2) * np.sinh(z / 2)


def bose_occupation(omega, temperature):
    w = np.asarray(omega, dtype=float)
    if np.any(w == 0):
        raise ValueError("Bose occupation is singular at omega = 0")
    return 1.0 / np.expm1(w / kelvin_to_au(temperature))


def classify_regime(temperature, params):
    """``classical`` when k_B T exceeds the noise peak frequency."""
    return "classical" if kelvin_to_au(temperature) > params.omega2 else "quantum"


def expand_correlation(config: BathConfig) -> BathExpansion:
    """Exponential-sum decomposition of the bath correlation function.

    Residues are evaluated in closed form: at a simple root ``z`` of the
    degree-8 denominator ``D``, ``Res J = p z^3 / prod_{r != z} (z - r)``.
    """
    params = config.params
    beta = config.beta
    roots = params.denominator_roots()
    poles = params.upper_poles()
    nus = 2.0 * np.pi * np.arange(1, config.n_matsubara + 1) / beta

    scale = max(abs(roots).max(), 1e-300)
    everything = np.concatenate([roots, 1j * nus])
    for i in range(len(everything)):
        for j in range(i + 1, len(everything)):
            if abs(everything[i] - everything[j]) < 1e-12 * scale:
                raise ValueError(f"degenerate poles at {everything[i]:.6g} and {everything[j]:.6g}")

    alpha = []
    for z in poles:
        others = roots[np.abs(roots - z) > 0]
        residue = params.p * z**3 / np.prod(z - others)
        alpha.append(2j * residue / _expm1(beta * z))
    for nu in nus:
        alpha.append((2j / beta * _spectral_density_complex(1j * nu, params)).real + 0j)
    alpha = np.array(alpha, dtype=complex)

    alpha_tilde = alpha.copy()
    alpha_tilde[0], alpha_tilde[1] = np.conj(alpha[1]), np.conj(alpha[0])
    alpha_tilde[2], alpha_tilde[3] = np.conj(alpha[3]), np.conj(alpha[2])
    gamma = np.concatenate([poles, 1j * nus])
    return BathExpansion(alpha, alpha_tilde, gamma, config.temperature,
                         config.n_matsubara, classify_regime(config.temperature, params))


def _frequency_breakpoints(params):
    """Subinterval edges for quadrature on (0, inf) around both peaks."""
    edges = {0.0}
    for om, ga in ((params.omega1, params.gamma1), (params.omega2, params.gamma2)):
        for m in (-20, -5, -1, 0, 1, 5, 20):
            w = om + m * ga
            if w > 0:
                edges.add(w)
    top = 200.0 * max(params.omega1 + params.gamma1, params.omega2 + params.gamma2)
    edges = sorted(e for e in edges if e < top) + [top]
    return np.array(edges)


def _quad(f, a, b, weight=None, wvar=None, scale=1.0, epsrel=1e-11):
    kw = dict(epsabs=1e-14 * scale, epsrel=epsrel, limit=400)
    if weight is not None:
        kw.update(weight=weight, wvar=wvar)
    with np.errstate(all="ignore"):
        value, err, *info = integrate.quad(f, a, b, full_output=1, **kw)
    if len(info) >= 2 and info[1] and err > 1e-8 * max(abs(value), scale):
        raise QuadratureError(f"quadrature on [{a:.3g}, {b:.3g}] did not converge: {info[1]}")
    return value


def correlation_reference(t, config: BathConfig):
    """Brute-force quadrature of C(t) for validation.

    Uses the equivalent one-sided form
    ``(1/pi) int_0^inf J(w) [coth(beta w/2) cos(w t) - i sin(w t)] dw``.
    """
    params = config.params
    if params.p == 0:
        return 0j
    beta = config.beta
    x_scale = params.omega2
    # work in x = w / x_scale with the integrand normalized by its peak
    j_peak = float(spectral_density(params.omega2, params))
    norm = j_peak / np.tanh(beta * params.omega2 / 2)

    def f_re(x):
        w = x * x_scale
        if w == 0.0:
            return 0.0
        return spectral_density(w, params) / np.tanh(beta * w / 2) / norm

    def f_im(x):
        return spectral_density(x * x_scale, params) / norm

    edges = _frequency_breakpoints(params) / x_scale
    tt = float(t) * x_scale
    re = im = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if tt == 0.0:
            re += _quad(f_re, a, b)
        else:
            re += _quad(f_re, a, b, "cos", tt)
            im -= _quad(f_im, a, b, "sin", tt)
    if tt == 0.0:
        re += _quad(f_re, edges[-1], np.inf)
    else:
        re += _quad(f_re, edges[-1], np.inf, "cos", tt)
        im -= _quad(f_im, edges[-1], np.inf, "sin", tt)
    return complex(re, im) * norm * x_scale / np.pi


def uphill_fraction(config: BathConfig):
    """Share of ``C(0)`` carried by positive frequencies, where the
    integrand is ``J n`` (absorption from the bath)."""
    params = config.params
    beta = config.beta
    x_scale = params.omega2
    edges = _frequency_breakpoints(params) / x_scale
    j_peak = float(spectral_density(params.omega2, params))

    def f(x):
        w = x * x_scale
        return 0.0 if w == 0.0 else float(spectral_density(w, params) / np.expm1(beta * w)) / j_peak

    up = sum(_quad(f, a, b) for a, b in zip(edges[:-1], edges[1:])) + _quad(f, edges[-1], np.inf)
    up *= j_peak * x_scale / np.pi
    return up / correlation_reference(0.0, config).real


def reorganization_energy(params: SpectralDensityParams):
    """``(1/pi) int_0^inf J(w)/w dw`` by quadrature."""
    if params.p == 0:
        return 0.0
    x_scale = params.omega2
    j_peak = float(spectral_density(params.omega2, params))

    def f(x):
        w = x * x_scale
        return float(spectral_density(w, params) / w) / j_peak if w else 0.0

    edges = _frequency_breakpoints(params) / x_scale
    total = sum(_quad(f, a, b) for a, b in zip(edges[:-1], edges[1:])) + _quad(f, edges[-1], np.inf)
    return total * j_peak * x_scale / np.pi


def rescale_to_eta(params: SpectralDensityParams, eta, omega_bd):
    """Copy of ``params`` with ``p`` chosen so that ``lambda / omega_bd = eta``."""
    unit = reorganization_energy(replace(params, p=1.0))
    return replace(params, p=eta * omega_bd / unit)


def golden_rule_rate(v_coupling, omega, config: BathConfig):
    """Fermi golden-rule downhill rate ``2 pi |V|^2 J(w) [n(w) + 1]``."""
    if not omega > 0:
        raise ValueError("golden-rule rate needs a positive transition frequency")
    j = spectral_density(omega, config.params)
    n = bose_occupation(omega, config.temperature)
    return float(2.0 * np.pi * abs(v_coupling) ** 2 * j * (n + 1.0))


def transfer_rate(v_coupling, omega, config: BathConfig):
    """Weak-coupling downhill rate implied by this module's ``C(t)``.

    Second-order perturbation theory with ``C(t) = (1/pi) int J n e^{iwt}``
    gives ``|V|^2 int C(t) e^{-iwt} dt = 2 |V|^2 J(w) [n(w) + 1]``, i.e.
    :func:`golden_rule_rate` divided by ``pi``.
    """
    return golden_rule_rate(v_coupling, omega, config) / np.pi
