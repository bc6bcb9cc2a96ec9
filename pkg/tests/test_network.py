import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antenna_heom.network import (
    STATE_LABELS, EigenStructure, NetworkSpec, build_operators, eigenanalyze, excitation_numbers, sigma_minus,
    site_operator, transition_dipole,
)
from antenna_heom.units import au_to_ghz


def test_basis_ordering():
    # |n1 n2 n3> has flat index 4 n1 + 2 n2 + n3
    lower3 = sigma_minus(2)
    assert lower3[0, 1] == 1 and np.count_nonzero(lower3) == 4
    lower1 = sigma_minus(0)
    assert lower1[0, 4] == 1
    assert list(excitation_numbers()) == [0, 1, 1, 2, 1, 2, 2, 3]


def test_site_operator_acts_on_one_site():
    z = site_operator(np.diag([-1.0, 1.0]), 1)
    assert np.allclose(np.diag(z).real, [-1, -1, 1, 1, -1, -1, 1, 1])


def test_operators_hermitian_and_number_conserving(ops):
    h = ops.h_system
    assert np.allclose(h, h.conj().T, atol=0)
    assert np.allclose(h @ ops.number, ops.number @ h, atol=1e-22)
    assert np.allclose(ops.s_coupling, np.diag(np.diag(ops.s_coupling)))
    assert sorted(set(np.diag(ops.s_coupling).real)) == [0.0, 2.0]
    assert np.allclose(ops.dipole, ops.dipole_plus + ops.dipole_plus.conj().T)


def test_excitation_energies(eig):
    # direct diagonalization of the one-excitation block (GHz) as oracle
    block = np.array([[11.5, 0.05, 0.0], [0.05, 12.0, 0.5], [0.0, 0.5, 12.0]])
    single = np.linalg.eigvalsh(block)
    e0 = eig.energy("g")
    got = [au_to_ghz(eig.energy(k) - e0) for k in ("D-", "D+", "B")]
    assert np.allclose(sorted(got), single, atol=1e-12)
    top = au_to_ghz(eig.energy("top") - e0)
    assert top == pytest.approx(35.5, abs=1e-12)
    # two-excitation states are complements: E = 35.5 - E(single)
    doubles = sorted(au_to_ghz(eig.energy(k) - e0) for k in ("De", "Be-", "Be+"))
    assert np.allclose(doubles, sorted(35.5 - single), atol=1e-12)


def test_labels_and_sectors(eig):
    assert set(eig.labels) == set(STATE_LABELS)
    sector = {k: int(eig.sectors[eig.index(k)]) for k in STATE_LABELS}
    assert sector == {"g": 0, "D-": 1, "D+": 1, "B": 1, "De": 2, "Be-": 2, "Be+": 2, "top": 3}
    assert eig.energy("D-") < eig.energy("D+")
    assert eig.energy("Be-") < eig.energy("Be+")


def test_ground_state_is_vacuum(eig):
    g = eig.vector("g")
    assert abs(g[0]) == pytest.approx(1.0)


def test_bright_and_dark(eig):
    assert transition_dipole(eig, "g", "B") == pytest.approx(np.sqrt(2), abs=2e-3)
    assert transition_dipole(eig, "g", "D-") < 0.05
    assert transition_dipole(eig, "g", "D+") < 0.05
    # De is dark towards the whole one-excitation sector
    assert max(transition_dipole(eig, "De", k) for k in ("D-", "D+", "B")) <= 0.3


def test_sign_convention(eig):
    for k in range(8):
        v = eig.vectors[:, k]
        m = np.argmax(np.abs(v))
        assert v[m].real > 0 and abs(v[m].imag) < 1e-15


def test_omega_bd_near_one_ghz(eig):
    assert au_to_ghz(eig.omega_bd()) == pytest.approx(1.0019, abs=1e-3)


def test_asymmetric_coupling_names_entries():
    bad = ((0, 0.5, 0), (0.4, 0, 0.05), (0, 0.05, 0))
    with pytest.raises(ValueError, match="J12=0.5/J21=0.4"):
        NetworkSpec(coupling=bad)


@pytest.mark.parametrize("kwargs", [
    {"omega": (12.0, -1.0, 11.5)},
    {"omega": (12.0, 12.0)},
    {"noise_site": 4},
    {"dipole_sites": (1, 5)},
    {"coupling": ((1.0, 0.5, 0.0), (0.5, 0.0, 0.05), (0.0, 0.05, 0.0))},
])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        NetworkSpec(**kwargs)


def test_eigen_json(eig):
    data = json.loads(eig.to_json())
    assert data["labels"] == list(STATE_LABELS)
    assert data["excitation_ghz"][0] == 0.0
    assert len(data["vectors"]["B"]) == 8
    assert np.array(data["dipole_table"]).shape == (8, 8)


def test_eigen_json_round_trip(eig):
    back = EigenStructure.from_json(eig.to_json())
    for label in STATE_LABELS:
        assert back.energy(label) == pytest.approx(eig.energy(label), rel=1e-14, abs=1e-22)
        assert np.allclose(back.vector(label), eig.vector(label), atol=1e-15)
        assert back.sectors[back.index(label)] == eig.sectors[eig.index(label)]
    assert back.omega_bd() == pytest.approx(eig.omega_bd(), rel=1e-12)
    assert transition_dipole(back, "g", "B") == pytest.approx(transition_dipole(eig, "g", "B"))


def test_unexpected_structure_rejected():
    # all qubits far apart and uncoupled: no bright/dark split of the dipole pattern
    spec = NetworkSpec(omega=(10.0, 12.0, 14.0), coupling=((0, 0, 0), (0, 0, 0), (0, 0, 0)))
    with pytest.raises(ValueError, match="bright"):
        eigenanalyze(build_operators(spec))


@settings(max_examples=30, deadline=None)
@given(
    w=st.lists(st.floats(5.0, 20.0), min_size=3, max_size=3),
    j=st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
)
def test_hamiltonian_invariants(w, j):
    coupling = ((0, j[0], j[1]), (j[0], 0, j[2]), (j[1], j[2], 0))
    ops = build_operators(NetworkSpec(omega=tuple(w), coupling=coupling))
    h = ops.h_system
    assert np.allclose(h, h.conj().T)
    assert np.abs(h @ ops.number - ops.number @ h).max() < 1e-20
    assert np.abs(ops.s_coupling @ ops.number - ops.number @ ops.s_coupling).max() == 0
    # trace of H: sum of site energies cancel pairwise (sigma_z is traceless)
    assert abs(np.trace(h)) < 1e-18
