import numpy as np
import pytest

from antenna_heom.bath import BathConfig, SpectralDensityParams, expand_correlation, reorganization_energy
from antenna_heom.driving import Pulse, amplitude_for_energy
from antenna_heom.engine import (
    EmissionRates, HeomPropagator, channel_lowering, lindblad_term, load_checkpoint, save_checkpoint,
)
from antenna_heom.integrate import IntegratorConfig, cash_karp
from antenna_heom.kernels import available_backends
from antenna_heom.units import ns_to_au, rate_mhz_to_au

from conftest import random_density_matrix

RATES = EmissionRates(float(rate_mhz_to_au(10.0)), float(rate_mhz_to_au(10.0)))


def classical_prop(ops, eig, level=4, **kw):
    config = BathConfig(SpectralDensityParams.classical(), 298.0, 1)
    ops = ops.with_renormalization(reorganization_energy(config.params))
    return HeomPropagator(ops, expand_correlation(config), level=level, **kw)


def quantum_prop(ops, eig, level=2, n_mat=3, eta=0.01, **kw):
    config = BathConfig(SpectralDensityParams.quantum(), 0.01, n_mat, eta).calibrated(eig.omega_bd())
    ops = ops.with_renormalization(reorganization_energy(config.params))
    return HeomPropagator(ops, expand_correlation(config), level=level, **kw)


def project(eig, rho):
    v = eig.vectors
    return v.conj().T @ rho @ v


def run(prop, rho0, t_ns, dt_ns=0.5, cfg=None):
    cfg = cfg or IntegratorConfig()
    times = ns_to_au(np.arange(0.0, t_ns + 1e-9, dt_ns))
    out = []
    y = cash_karp(prop, prop.initial_state(rho0), 0.0, times[-1], cfg, output_times=times,
                  breakpoints=prop.breakpoints, observer=lambda t, y: out.append(prop.to_lab(y[0].copy(), t)))
    return np.array(out), y


# -- Lindblad channels -------------------------------------------------------------
def test_lindblad_ground_is_stationary(ops, eig):
    g = np.outer(eig.vector("g"), eig.vector("g").conj())
    for lower in (ops.lower_res, ops.lower_guide):
        assert np.abs(lindblad_term(g, lower, 1.0)).max() == 0


def test_lindblad_resonator_two_level(ops):
    rho = np.zeros((8, 8), complex)
    rho[1, 1] = 1.0  # |001>
    d = lindblad_term(rho, ops.lower_res, 0.3)
    assert d[0, 0] == pytest.approx(0.3)
    assert d[1, 1] == pytest.approx(-0.3)


def test_lindblad_waveguide_bright_state(ops, eig):
    b = eig.vector("B")
    d = lindblad_term(np.outer(b, b.conj()), ops.lower_guide, 1.0)
    mu = abs(eig.vector("g").conj() @ ops.lower_guide @ b)
    assert np.real(eig.vector("g").conj() @ d @ eig.vector("g")) == pytest.approx(mu**2, rel=1e-12)
    assert mu**2 == pytest.approx(2.0, abs=0.01)


def test_lindblad_zero_rate(ops):
    assert np.all(lindblad_term(np.eye(8), ops.lower_res, 0.0) == 0)


def test_channel_lookup(ops):
    assert channel_lowering(ops, "resonator") is ops.lower_res
    with pytest.raises(ValueError):
        channel_lowering(ops, "antenna")


# -- right-hand side ----------------------------------------------------------------
def test_unitary_derivative(ops, eig, rng):
    prop = HeomPropagator(ops)
    assert prop.n_ados == 1
    rho = random_density_matrix(rng)
    d = prop.rhs(0.0, prop.initial_state(rho))[0]
    assert np.allclose(d, -1j * (ops.h_system @ rho - rho @ ops.h_system), atol=1e-22)
    b = eig.vector("B")
    d = prop.rhs(0.0, prop.initial_state(np.outer(b, b.conj())))[0]
    assert np.abs(np.diag(project(eig, d))).max() < 1e-20


def test_trace_of_derivative_vanishes(ops, eig, rng):
    pulse = Pulse(1e-6, ns_to_au(5.0), eig.gap("B", "g"))
    prop = quantum_prop(ops, eig, pulse=pulse, rates=RATES, frame_frequency=eig.gap("B", "g"))
    y = rng.standard_normal((prop.n_ados, 8, 8)) + 1j * rng.standard_normal((prop.n_ados, 8, 8))
    y[0] = random_density_matrix(rng)
    d = prop.rhs(ns_to_au(1.3), y)
    scale = np.abs(d[0]).max()
    assert abs(np.trace(d[0])) < 1e-14 * max(scale, 1.0) + 1e-14


def test_drift_sign_makes_ados_decay(ops, eig):
    # field and emission off, S = 0: each ADO only feels its own drift
    prop = classical_prop(ops, eig, level=2)
    assert np.all(prop.drift.real <= 0)
    assert np.all(prop.drift.real[1:] < 0)


def test_ados_relax(ops, eig):
    prop = quantum_prop(ops, eig, level=2)
    b = eig.vector("B")
    sol, y = run(prop, np.outer(b, b.conj()), 150.0, dt_ns=50.0)
    norms = np.abs(prop.physical_ados(y)[1:]).max(axis=(1, 2))
    # after 150 ns the auxiliary operators carry only the stationary correlations
    early = []
    run_early = HeomPropagator(prop.ops, prop.expansion, level=2)
    cash_karp(run_early, run_early.initial_state(np.outer(b, b.conj())), 0.0, ns_to_au(2.0),
              IntegratorConfig(), output_times=[ns_to_au(2.0)],
              observer=lambda t, yy: early.append(np.abs(run_early.physical_ados(yy)[1:]).max()))
    assert norms.max() < early[0]
    assert np.all(np.isfinite(norms))


def test_diagonal_coupling_required(ops):
    from dataclasses import replace
    bad = replace(ops, s_coupling=ops.s_coupling + ops.lower_res + ops.lower_res.T)
    config = BathConfig(SpectralDensityParams.classical(), 298.0, 1)
    with pytest.raises(ValueError, match="diagonal"):
        HeomPropagator(bad, expand_correlation(config))


def test_fast_matsubara_mode_folded(ops, eig):
    prop = classical_prop(ops, eig)
    assert prop.folded == [4]
    assert prop.n_ados == 70
    unfolded = classical_prop(ops, eig, fold_rate=np.inf)
    assert unfolded.folded == [] and unfolded.n_ados == 126


def test_folding_matches_explicit_modes(ops, eig):
    # fold the tail of a quantum expansion and compare with keeping it
    config = BathConfig(SpectralDensityParams.quantum(), 0.01, 8, 0.01).calibrated(eig.omega_bd())
    exp = expand_correlation(config)
    o = ops.with_renormalization(reorganization_energy(config.params))
    threshold = 0.5 * (exp.gamma[7].imag + exp.gamma[8].imag)  # fold nu_5 .. nu_8
    b = eig.vector("B")
    rho0 = np.outer(b, b.conj())
    frame = eig.gap("B", "g")
    explicit, _ = run(HeomPropagator(o, exp, level=2, frame_frequency=frame, fold_rate=np.inf), rho0, 10.0)
    folded_p = HeomPropagator(o, exp, level=2, frame_frequency=frame, fold_rate=threshold)
    assert folded_p.folded == [8, 9, 10, 11]
    folded, _ = run(folded_p, rho0, 10.0)
    dropped_exp = expand_correlation(BathConfig(config.params, 0.01, 4))
    dropped, _ = run(HeomPropagator(o, dropped_exp, level=2, frame_frequency=frame), rho0, 10.0)
    err_fold = np.abs(folded - explicit).max()
    err_drop = np.abs(dropped - explicit).max()
    assert err_fold < 1e-4
    assert err_fold < err_drop


def test_zero_bath_collapses_hierarchy(ops):
    config = BathConfig(SpectralDensityParams(0.0), 298.0, 1)
    prop = HeomPropagator(ops, expand_correlation(config), level=4)
    assert prop.n_ados == 1


# -- integration ----------------------------------------------------------------------
def test_unitary_run_preserves_populations(ops, eig, rng):
    prop = HeomPropagator(ops)
    rho0 = random_density_matrix(rng)
    sol, _ = run(prop, rho0, 500.0, dt_ns=25.0)
    pops0 = np.diag(project(eig, rho0)).real
    pops = np.array([np.diag(project(eig, r)).real for r in sol])
    assert np.abs(pops - pops0).max() < 1e-8


def test_doublet_coherence_phase(ops, eig):
    dm, dp = eig.vector("D-"), eig.vector("D+")
    psi = (dm + dp) / np.sqrt(2)
    prop = HeomPropagator(ops)
    t_ns = np.arange(0.0, 50.0 + 1e-9, 0.5)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13)
    sol, _ = run(prop, np.outer(psi, psi.conj()), 50.0, cfg=cfg)
    coh = np.array([project(eig, r)[eig.index("D-"), eig.index("D+")] for r in sol])
    gap = eig.gap("D+", "D-")
    expected = 0.5 * np.exp(1j * gap * ns_to_au(t_ns))
    phase_err = np.abs(np.angle(coh / expected))
    assert np.abs(np.abs(coh) - 0.5).max() < 1e-8
    assert (phase_err / np.maximum(t_ns, 1.0)).max() < 1e-6  # rad per ns


@pytest.mark.parametrize("backend", available_backends())
def test_backends_agree(ops, eig, rng, backend):
    pulse = Pulse(1e-6, ns_to_au(5.0), eig.gap("B", "g"))
    ref = quantum_prop(ops, eig, level=3, pulse=pulse, rates=RATES, backend="python")
    prop = quantum_prop(ops, eig, level=3, pulse=pulse, rates=RATES, backend=backend)
    y = rng.standard_normal((prop.n_ados, 8, 8)) + 1j * rng.standard_normal((prop.n_ados, 8, 8))
    a = ref.rhs(ns_to_au(2.0), y)
    b = prop.rhs(ns_to_au(2.0), y)
    assert np.abs(a - b).max() <= 1e-13 * np.abs(a).max()


@pytest.mark.skipif("cython" not in available_backends(), reason="compiled kernel not built")
def test_compiled_kernel_thread_count_is_bitwise_neutral(ops, eig, rng):
    one = quantum_prop(ops, eig, level=3, backend="cython", threads=1)
    four = quantum_prop(ops, eig, level=3, backend="cython", threads=4)
    y = rng.standard_normal((one.n_ados, 8, 8)) + 1j * rng.standard_normal((one.n_ados, 8, 8))
    assert np.array_equal(one.rhs(0.0, y), four.rhs(0.0, y))


def driven_pair(ops, eig, **kw):
    carrier = eig.gap("B", "g")
    tau = ns_to_au(5.0)
    pulse = Pulse(amplitude_for_energy(5e-8, tau, carrier), tau, carrier)
    return classical_prop(ops, eig, level=2, pulse=pulse, rates=RATES, **kw)


def test_lab_and_rotating_frames_agree(ops, eig):
    g = np.outer(eig.vector("g"), eig.vector("g").conj())
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)
    lab, _ = run(driven_pair(ops, eig, frame_frequency=0.0), g, 8.0, cfg=cfg)
    rot, _ = run(driven_pair(ops, eig, frame_frequency=eig.gap("B", "g")), g, 8.0, cfg=cfg)
    assert np.abs(lab - rot).max() < 1e-7
    assert np.abs(np.diag(project(eig, lab[-1])) - np.diag(project(eig, rot[-1]))).max() < 1e-8


def test_frame_transform_round_trip(ops, eig, rng):
    prop = driven_pair(ops, eig, frame_frequency=eig.gap("B", "g"))
    rho = random_density_matrix(rng)
    assert np.allclose(prop.to_lab(prop.to_frame(rho, 123.0), 123.0), rho)


def test_scaled_and_unscaled_agree(ops, eig):
    b = eig.vector("B")
    rho0 = np.outer(b, b.conj())
    frame = eig.gap("B", "g")
    scaled, ys = run(classical_prop(ops, eig, level=3, frame_frequency=frame, scaled=True), rho0, 10.0)
    plain_prop = classical_prop(ops, eig, level=3, frame_frequency=frame, scaled=False)
    plain, yp = run(plain_prop, rho0, 10.0)
    assert np.abs(scaled - plain).max() < 1e-6
    scaled_prop = classical_prop(ops, eig, level=3, frame_frequency=frame, scaled=True)
    phys = scaled_prop.physical_ados(ys)
    assert np.abs(phys - yp).max() <= 1e-5 * np.abs(yp).max()


def test_driven_run_physical_invariants(ops, eig):
    g = np.outer(eig.vector("g"), eig.vector("g").conj())
    sol, _ = run(driven_pair(ops, eig, frame_frequency=eig.gap("B", "g")), g, 20.0)
    trace = np.real(np.trace(sol, axis1=1, axis2=2))
    assert np.abs(trace - 1).max() < 1e-7
    assert np.abs(sol - np.conj(np.swapaxes(sol, 1, 2))).max() < 1e-8
    assert np.linalg.eigvalsh(sol).min() > -1e-6
    # the pulse excited the network
    assert 1 - np.real(sol[-1][0, 0]) > 1e-3


def test_checkpoint_resume(ops, eig, tmp_path):
    b = eig.vector("B")
    rho0 = np.outer(b, b.conj())
    frame = eig.gap("B", "g")
    prop = classical_prop(ops, eig, level=3, frame_frequency=frame)
    cfg = IntegratorConfig()
    full = cash_karp(prop, prop.initial_state(rho0), 0.0, ns_to_au(10.0), cfg)
    half = cash_karp(prop, prop.initial_state(rho0), 0.0, ns_to_au(5.0), cfg)
    path = tmp_path / "state.json"
    save_checkpoint(path, prop, half, ns_to_au(5.0), extra={"note": "half"})
    y, t, extra = load_checkpoint(path, prop)
    assert np.array_equal(y, half) and t == ns_to_au(5.0) and extra == {"note": "half"}
    resumed = cash_karp(prop, y, t, ns_to_au(10.0), cfg)
    assert np.abs(resumed[0] - full[0]).max() < 1e-6


def test_checkpoint_mismatch_rejected(ops, eig, tmp_path):
    prop = classical_prop(ops, eig, level=3)
    other = classical_prop(ops, eig, level=2)
    path = tmp_path / "state.json"
    save_checkpoint(path, prop, prop.initial_state(np.eye(8) / 8), 0.0)
    with pytest.raises(ValueError, match="hierarchy"):
        load_checkpoint(path, other)
    unscaled = classical_prop(ops, eig, level=3, scaled=False)
    with pytest.raises(ValueError, match="scaling"):
        load_checkpoint(path, unscaled)


def test_describe(ops, eig):
    d = classical_prop(ops, eig).describe()
    assert d["n_ados"] == 70 and d["folded_modes"] == [4]
    assert d["hierarchy"]["ordering"] == "graded-lex-desc"
