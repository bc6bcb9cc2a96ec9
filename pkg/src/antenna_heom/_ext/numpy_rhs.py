"""Vectorized numpy evaluation of the hierarchy right-hand side."""
import numpy as np


def hierarchy_rhs(y, dy, h_rows, h_cols, h_vals, s, drift, plus, minus, cup, a, b, fold):
    """Write the bath and Hamiltonian part of d(ados)/dt into ``dy``.

    ``y``/``dy`` have shape (N, d, d). The Hamiltonian arrives as COO
    triplets, ``s`` is the diagonal of the coupling operator and ``fold``
    a (d, d) elementwise rate shared by every ADO. Neighbor offsets of -1
    point at the zero padding row.
    """
    n_ado, dim, _ = y.shape
    h = np.zeros((dim, dim), dtype=complex)
    h[h_rows, h_cols] = h_vals
    np.matmul(h, y, out=dy)
    dy -= y @ h
    dy *= -1j
    dy += (drift[:, None, None] + fold[None, :, :]) * y

    if plus.shape[1]:
        pad = np.concatenate([y, np.zeros((1, dim, dim), dtype=y.dtype)])
        up = np.einsum("nk,nkij->nij", cup, pad[plus])
        down = pad[minus]
        da = np.einsum("nk,nkij->nij", a, down)
        db = np.einsum("nk,nkij->nij", b, down)
        sdiff = s[:, None] - s[None, :]
        dy -= 1j * (sdiff * up + s[:, None] * da - db * s[None, :])
    return dy
