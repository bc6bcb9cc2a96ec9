"""HEOM simulation of a driven three-qubit antenna coupled to a peaked noise bath."""
from .bath import (
    BathConfig, BathExpansion, SpectralDensityParams, expand_correlation, golden_rule_rate,
    reorganization_energy, spectral_density, transfer_rate,
)
from .config import ConfigError, RunConfig, default_config, load_config, parse_config
from .driving import Pulse, amplitude_for_energy, field_value, pulse_energy
from .engine import EmissionRates, HeomPropagator, load_checkpoint, save_checkpoint
from .hierarchy import enumerate_hierarchy, hierarchy_size
from .integrate import IntegrationError, IntegratorConfig, cash_karp
from .network import EigenStructure, NetworkSpec, build_operators, eigenanalyze, transition_dipole
from .observables import (
    ScanResult, TrajectoryRecord, efficiency_ratio, eigen_projection, emission_fluxes, scan_grid,
)
from .simulation import build_setup, run_trajectory

__version__ = "0.1.0"
