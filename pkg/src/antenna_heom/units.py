"""Unit conversions between laboratory units and atomic units.

Frequencies quoted in GHz are ordinary frequencies; the angular frequency
in atomic units is ``2*pi*nu`` multiplied by the atomic unit of time.
Emission rates quoted in MHz are population decay rates (no 2*pi).
"""
import numpy as np
from scipy.constants import physical_constants

AU_TIME_S = physical_constants["atomic unit of time"][0]
#: one atomic unit of angular frequency, in rad/s (about 4.134137e16)
AU_ANGULAR_FREQUENCY = 1.0 / AU_TIME_S
HARTREE_PER_KELVIN = physical_constants["kelvin-hartree relationship"][0]
#: pulse energies are quoted in units of 1e-8 hartree
PULSE_ENERGY_UNIT = 1e-8


def ghz_to_au(nu_ghz):
    return 2.0 * np.pi * np.asarray(nu_ghz, dtype=float) * 1e9 * AU_TIME_S


def au_to_ghz(omega_au):
    return np.asarray(omega_au) / (2.0 * np.pi * 1e9 * AU_TIME_S)


def mhz_to_au(nu_mhz):
    return ghz_to_au(np.asarray(nu_mhz, dtype=float) * 1e-3)


def rate_mhz_to_au(rate_mhz):
    """Decay rate in 1e6 s^-1 to inverse atomic time."""
    return np.asarray(rate_mhz, dtype=float) * 1e6 * AU_TIME_S


def rate_au_to_mhz(rate_au):
    return np.asarray(rate_au) / (1e6 * AU_TIME_S)


def ns_to_au(t_ns):
    return np.asarray(t_ns, dtype=float) * 1e-9 / AU_TIME_S


def au_to_ns(t_au):
    return np.asarray(t_au) * AU_TIME_S * 1e9


def kelvin_to_au(temperature_k):
    return float(temperature_k) * HARTREE_PER_KELVIN
