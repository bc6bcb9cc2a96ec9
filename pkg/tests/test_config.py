import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antenna_heom.bath import CLASSICAL_TEMPERATURE, QUANTUM_TEMPERATURE, TABLE_P_CLASSICAL, TABLE_P_QUANTUM
from antenna_heom.config import SCHEMA, ConfigError, default_config, load_config, parse_config
from antenna_heom.units import rate_mhz_to_au


def test_defaults_are_the_reference_network():
    cfg = parse_config("")
    assert cfg["mode"] == "trajectory"
    assert cfg["network.omega_ghz"] == (12.0, 12.0, 11.5)
    assert cfg["network.coupling_ghz"][0][1] == 0.5
    assert cfg["network.coupling_ghz"][1][2] == 0.05
    assert cfg["network.coupling_ghz"][0][2] == 0.0
    assert cfg["rates.res_mhz"] == 10.0 and cfg["rates.loss_mhz"] == 10.0
    assert cfg["bath.regime"] == "classical"
    assert cfg["bath.temperature_k"] == CLASSICAL_TEMPERATURE
    assert cfg["bath.p_au"] == TABLE_P_CLASSICAL
    rates = cfg.emission_rates()
    assert rates.res == pytest.approx(rate_mhz_to_au(10.0))


def test_echo_lists_every_key_with_resolved_values():
    text = parse_config("").echo()
    keys = [line.split(" = ")[0] for line in text.strip().split("\n")]
    assert keys == list(SCHEMA)
    assert "rates.res_mhz = 10.0" in text


def test_comments_lists_and_matrix():
    cfg = parse_config("""
        # a comment
        network.omega_ghz = 12.0, 12.1, 11.4   # trailing comment
        network.coupling_ghz = 0, 0.4, 0; 0.4, 0, 0.06; 0, 0.06, 0
        bath.enabled = false
    """)
    assert cfg["network.omega_ghz"] == (12.0, 12.1, 11.4)
    assert cfg["network.coupling_ghz"][1][2] == 0.06
    assert cfg.spectral_params().p == 0.0


def test_asymmetric_coupling_names_entries():
    with pytest.raises(ConfigError) as info:
        parse_config("network.coupling_ghz = 0, 0.5, 0; 0.4, 0, 0.05; 0, 0.05, 0\n")
    msg = str(info.value)
    assert "(1,2)" in msg.replace(" ", "") or "[1,2]" in msg.replace(" ", "") or "J12" in msg
    assert "line 1" in msg


def test_energy_and_amplitude_are_exclusive():
    with pytest.raises(ConfigError, match="either") as info:
        parse_config("pulse.energy_1e8ha = 5\npulse.amplitude_au = 1e-6\n")
    assert "line 1" in str(info.value) and "line 2" in str(info.value)


def test_explicit_amplitude_replaces_default_energy():
    cfg = parse_config("pulse.amplitude_au = 2e-6\n")
    assert cfg["pulse.energy_1e8ha"] is None and cfg["pulse.amplitude_au"] == 2e-6


@pytest.mark.parametrize("text, fragment", [
    ("rates.res_mzh = 10\n", "did you mean 'rates.res_mhz'"),
    ("rates.res_mhz = ten\n", "expected a number"),
    ("rates.res_mhz = -1\n", "non-negative"),
    ("integrator.level = 2.5\n", "expected an integer"),
    ("mode = movie\n", "expected one of"),
    ("just some words\n", "key = value"),
    ("bath.temperature_k = nan\n", "NaN"),
])
def test_line_precise_errors(text, fragment):
    with pytest.raises(ConfigError, match="line 1") as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_error_reports_correct_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("mode = scan\n\nbath.p_au = -2\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="twice"):
        parse_config("rates.res_mhz = 1\nrates.res_mhz = 2\n")


def test_overrides_win_and_are_located():
    cfg = parse_config("rates.res_mhz = 1\n", ["rates.res_mhz=3", "mode = scan"])
    assert cfg["rates.res_mhz"] == 3.0 and cfg["mode"] == "scan"
    with pytest.raises(ConfigError, match="override 2"):
        parse_config("", ["mode=scan", "bogus.key=1"])
    with pytest.raises(ConfigError, match="override 1"):
        parse_config("", ["mode"])


def test_coupling_in_mhz():
    cfg = parse_config("network.coupling_mhz = 0, 500, 0; 500, 0, 50; 0, 50, 0\n")
    assert cfg["network.coupling_ghz"] == parse_config("")["network.coupling_ghz"]


def test_quantum_preset():
    cfg = parse_config("bath.regime = quantum\n")
    assert cfg["bath.temperature_k"] == QUANTUM_TEMPERATURE
    assert cfg["bath.p_au"] == TABLE_P_QUANTUM
    assert cfg["bath.n_matsubara"] == 10 and cfg["integrator.level"] == 5
    explicit = parse_config("bath.regime = quantum\nintegrator.level = 3\n")
    assert explicit["integrator.level"] == 3
    switched = default_config(bath__regime="quantum")
    assert switched == cfg


def test_tau_beyond_run_is_rejected():
    with pytest.raises(ConfigError, match="t_final"):
        parse_config("pulse.tau_ns = 600\n")


def test_load_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mode = field_free\nbath.n_matsubara = 2\n")
    cfg = load_config(path)
    assert cfg["mode"] == "field_free"
    with pytest.raises(ConfigError, match="run.cfg line 1"):
        path.write_text("mode = nope\n")
        load_config(path)


def test_builders_convert_units():
    cfg = default_config(integrator__t_final_ns=2.0, pulse__tau_ns=1.0, integrator__max_step_au=math.inf)
    icfg = cfg.integrator_config()
    assert icfg.t_final == pytest.approx(2.0 * 4.134137e7, rel=1e-6)
    assert icfg.max_step == math.inf
    assert cfg.bath_config().n_matsubara == 1


def test_round_trip_defaults_and_presets():
    for text in ("", "bath.regime = quantum\n", "pulse.amplitude_au = 3e-7\nmode = scan\n"):
        cfg = parse_config(text)
        assert parse_config(cfg.echo()) == cfg


_finite = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(
    omega=st.tuples(_finite, _finite, _finite),
    j12=st.floats(-2, 2, allow_nan=False), j23=st.floats(-2, 2, allow_nan=False),
    res=st.floats(0, 1e3, allow_nan=False), level=st.integers(0, 8),
    regime=st.sampled_from(["classical", "quantum"]),
    mode=st.sampled_from(["trajectory", "field_free", "scan", "convergence"]),
    energies=st.lists(_finite, min_size=1, max_size=4),
    amplitude=st.one_of(st.none(), _finite),
)
def test_round_trip_property(omega, j12, j23, res, level, regime, mode, energies, amplitude):
    cfg = default_config(bath__regime=regime).update({
        "network.omega_ghz": omega,
        "network.coupling_ghz": ((0.0, j12, 0.0), (j12, 0.0, j23), (0.0, j23, 0.0)),
        "rates.res_mhz": res, "integrator.level": level, "mode": mode,
        "scan.energies_1e8ha": tuple(energies),
        "pulse.energy_1e8ha": None if amplitude is not None else 1.0,
        "pulse.amplitude_au": amplitude,
    })
    assert parse_config(cfg.echo()) == cfg
