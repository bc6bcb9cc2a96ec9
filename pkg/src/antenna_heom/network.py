"""Three-qubit antenna network: operators and eigenstructure.

Basis states are ordered as ``|n1 n2 n3>`` with ``n_i in {0, 1}`` and flat
index ``4*n1 + 2*n2 + n3``, i.e. ``np.kron(q1, np.kron(q2, q3))``.
Sites are numbered 1..3 at the interface and 0..2 internally.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .units import au_to_ghz, ghz_to_au

N_SITES = 3
DIM = 2**N_SITES

BASIS_LABELS = tuple(format(k, "03b") for k in range(DIM))
STATE_LABELS = ("g", "D-", "D+", "B", "De", "Be-", "Be+", "top")

#: a state is bright w.r.t. the sector below when its largest dipole
#: matrix element into that sector exceeds this value (a.u.)
BRIGHT_THRESHOLD = 0.3

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|
_SIGMA_PLUS = _SIGMA_MINUS.T
_SIGMA_Z = np.diag([-1.0, 1.0])


def site_operator(single, site):
    """Embed a 2x2 operator acting on ``site`` (0-based) into the 8-dim space."""
    factors = [np.eye(2)] * N_SITES
    factors[site] = single
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out.astype(complex)


def sigma_minus(site):
    return site_operator(_SIGMA_MINUS, site)


def sigma_plus(site):
    return site_operator(_SIGMA_PLUS, site)


def sigma_z(site):
    return site_operator(_SIGMA_Z, site)


def number_operator():
    return sum(sigma_plus(i) @ sigma_minus(i) for i in range(N_SITES))


def excitation_numbers():
    """Excitation number of every basis state."""
    return np.array([bin(k).count("1") for k in range(DIM)])


@dataclass(frozen=True)
class NetworkSpec:
    """Qubit frequencies and couplings in GHz, site indices 1-based."""

    omega: tuple = (12.0, 12.0, 11.5)
    coupling: tuple = ((0.0, 0.5, 0.0), (0.5, 0.0, 0.05), (0.0, 0.05, 0.0))
    dipole_sites: tuple = (1, 2)
    dipole_moment: float = 1.0
    noise_site: int = 2

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        coupling = np.asarray(self.coupling, dtype=float)
        if omega.shape != (N_SITES,):
            raise ValueError(f"omega must have {N_SITES} entries, got {omega.shape}")
        if np.any(omega <= 0):
            raise ValueError(f"qubit frequencies must be positive, got {omega.tolist()}")
        if coupling.shape != (N_SITES, N_SITES):
            raise ValueError(f"coupling must be 3x3, got shape {coupling.shape}")
        bad = asymmetric_entries(coupling)
        if bad:
            raise ValueError("coupling matrix is not symmetric at entries " + ", ".join(bad))
        if np.any(np.diag(coupling) != 0):
            raise ValueError("coupling matrix must have a zero diagonal")
        if self.noise_site not in (1, 2, 3):
            raise ValueError(f"noise_site must be 1, 2 or 3, got {self.noise_site}")
        if not set(self.dipole_sites) <= {1, 2, 3}:
            raise ValueError(f"dipole_sites must be a subset of {{1, 2, 3}}, got {self.dipole_sites}")
        # normalize to hashable tuples so specs compare by value
        object.__setattr__(self, "omega", tuple(float(w) for w in omega))
        object.__setattr__(self, "coupling", tuple(tuple(float(x) for x in row) for row in coupling))
        object.__setattr__(self, "dipole_sites", tuple(sorted(int(s) for s in self.dipole_sites)))
        object.__setattr__(self, "dipole_moment", float(self.dipole_moment))


def asymmetric_entries(matrix, atol=0.0):
    """Names like ``J12/J21`` of the off-diagonal pairs that break symmetry."""
    m = np.asarray(matrix, dtype=float)
    bad = []
    for i in range(m.shape[0]):
        for j in range(i + 1, m.shape[1]):
            if abs(m[i, j] - m[j, i]) > atol:
                bad.append(f"J{i + 1}{j + 1}={m[i, j]:g}/J{j + 1}{i + 1}={m[j, i]:g}")
    return bad


@dataclass(frozen=True)
class SystemOperators:
    """All system operators in atomic units, site basis.

    ``dipole_plus`` is the raising half of the dipole operator, so that
    ``dipole = dipole_plus + dipole_plus.conj().T``; the split is what the
    rotating-frame propagator needs.
    """

    h_system: np.ndarray
    s_coupling: np.ndarray
    dipole: np.ndarray
    dipole_plus: np.ndarray
    lower_res: np.ndarray
    lower_guide: np.ndarray
    number: np.ndarray
    h_ren_shift: float = 0.0
    spec: NetworkSpec = field(default_factory=NetworkSpec)

    def with_renormalization(self, lam):
        """Copy carrying the reorganization energy ``lam`` (a.u.)."""
        return SystemOperators(
            self.h_system, self.s_coupling, self.dipole, self.dipole_plus,
            self.lower_res, self.lower_guide, self.number, float(lam), self.spec,
        )

    def renormalization_term(self):
        """Counter-term ``lam * S @ S`` added to the system Hamiltonian."""
        return self.h_ren_shift * (self.s_coupling @ self.s_coupling)


def build_operators(spec: NetworkSpec) -> SystemOperators:
    omega = ghz_to_au(spec.omega)
    coupling = ghz_to_au(spec.coupling)

    h = sum(omega[i] / 2 * sigma_z(i) for i in range(N_SITES))
    for i in range(N_SITES):
        for j in range(i + 1, N_SITES):
            if coupling[i, j] != 0.0:
                hop = sigma_plus(i) @ sigma_minus(j)
                h = h + coupling[i, j] * (hop + hop.conj().T)

    noise = spec.noise_site - 1
    s = sigma_z(noise) + np.eye(DIM)

    d_plus = spec.dipole_moment * sum(sigma_plus(i - 1) for i in spec.dipole_sites)
    if isinstance(d_plus, int):  # empty dipole_sites
        d_plus = np.zeros((DIM, DIM), dtype=complex)

    return SystemOperators(
        h_system=h,
        s_coupling=s,
        dipole=d_plus + d_plus.conj().T,
        dipole_plus=d_plus,
        lower_res=sigma_minus(2),
        lower_guide=sigma_minus(0) + sigma_minus(1),
        number=number_operator(),
        spec=spec,
    )


@dataclass(frozen=True)
class EigenStructure:
    energies: np.ndarray
    vectors: np.ndarray
    labels: dict
    dipole_table: np.ndarray
    sectors: np.ndarray

    def index(self, label):
        try:
            return self.labels[label]
        except KeyError:
            raise KeyError(f"unknown state label {label!r}; expected one of {STATE_LABELS}") from None

    def vector(self, label):
        return self.vectors[:, self.index(label)]

    def energy(self, label):
        return self.energies[self.index(label)]

    def gap(self, upper, lower):
        return self.energy(upper) - self.energy(lower)

    def omega_bd(self):
        """Bright-to-dark-doublet gap, averaged over the doublet (a.u.)."""
        return self.energy("B") - 0.5 * (self.energy("D-") + self.energy("D+"))

    def to_json(self):
        order = [self.labels[name] for name in STATE_LABELS]
        e0 = self.energies[self.labels["g"]]
        report = {
            "labels": list(STATE_LABELS),
            "energies_ghz": [float(au_to_ghz(self.energies[k])) for k in order],
            "excitation_ghz": [float(au_to_ghz(self.energies[k] - e0)) for k in order],
            "basis": list(BASIS_LABELS),
            "vectors": {
                name: [float(x) for x in self.vectors[:, k].real]
                for name, k in zip(STATE_LABELS, order)
            },
            "dipole_table": [[float(self.dipole_table[i, j]) for j in order] for i in order],
        }
        return json.dumps(report, indent=2)

    @classmethod
    def from_json(cls, text):
        """Inverse of :meth:`to_json`; states come back in ``STATE_LABELS`` order."""
        data = json.loads(text)
        names = data["labels"]
        energies = np.asarray(ghz_to_au(np.asarray(data["energies_ghz"], dtype=float)))
        vectors = np.array([data["vectors"][name] for name in names], dtype=complex).T
        popcount = np.array([bin(k).count("1") for k in range(vectors.shape[0])])
        sectors = np.rint(np.abs(vectors.T) ** 2 @ popcount).astype(int)
        return cls(energies, vectors, {name: k for k, name in enumerate(names)},
                   np.asarray(data["dipole_table"], dtype=float), sectors)


def _fix_sign(vectors):
    out = vectors.copy()
    for k in range(out.shape[1]):
        v = out[:, k]
        m = np.argmax(np.abs(v))
        out[:, k] = v * (np.abs(v[m]) / v[m])
    return out


def eigenanalyze(ops: SystemOperators) -> EigenStructure:
    energies, vectors = np.linalg.eigh(ops.h_system)
    vectors = _fix_sign(vectors)
    if np.allclose(vectors.imag, 0.0, atol=1e-14):
        vectors = vectors.real.astype(complex)

    n_expect = np.real(np.einsum("ik,ij,jk->k", vectors.conj(), ops.number, vectors))
    sectors = np.rint(n_expect).astype(int)
    table = np.abs(vectors.conj().T @ ops.dipole @ vectors)

    def members(n):
        idx = np.flatnonzero(sectors == n)
        return idx[np.argsort(energies[idx], kind="stable")]

    expected = {0: 1, 1: 3, 2: 3, 3: 1}
    for n, count in expected.items():
        got = len(members(n))
        if got != count:
            raise ValueError(f"excitation sector {n} holds {got} states, expected {count}")

    def split(n):
        idx = members(n)
        below = members(n - 1)
        strength = table[np.ix_(idx, below)].max(axis=1)
        bright = [int(k) for k, s in zip(idx, strength) if s > BRIGHT_THRESHOLD]
        dark = [int(k) for k, s in zip(idx, strength) if s <= BRIGHT_THRESHOLD]
        return bright, dark

    bright1, dark1 = split(1)
    bright2, dark2 = split(2)
    if (len(bright1), len(dark1)) != (1, 2):
        raise ValueError(f"one-excitation sector has {len(bright1)} bright / {len(dark1)} dark states, expected 1/2")
    if (len(bright2), len(dark2)) != (2, 1):
        raise ValueError(f"two-excitation sector has {len(bright2)} bright / {len(dark2)} dark states, expected 2/1")

    labels = {
        "g": int(members(0)[0]),
        "D-": dark1[0],
        "D+": dark1[1],
        "B": bright1[0],
        "De": dark2[0],
        "Be-": bright2[0],
        "Be+": bright2[1],
        "top": int(members(3)[0]),
    }
    return EigenStructure(energies, vectors, labels, table, sectors)


def transition_dipole(eig: EigenStructure, i, j):
    """``|<i|dipole|j>|`` for two state labels."""
    return float(eig.dipole_table[eig.index(i), eig.index(j)])
