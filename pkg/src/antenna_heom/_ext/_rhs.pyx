# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hierarchy right-hand side.

Each ADO's derivative depends only on its own matrix and its neighbors,
so the outer loop is a ``prange``; results do not depend on the thread
count because every output element is written by exactly one iteration
with a fixed summation order.

Complex products are spelled out on real and imaginary parts: C99 complex
multiplication goes through an out-of-line NaN-aware helper otherwise.
"""
from cython.parallel cimport prange

ctypedef double complex cplx

cdef enum:
    MAXDIM = 16


def hierarchy_rhs(const cplx[:, :, ::1] y, cplx[:, :, ::1] dy,
                  const long[::1] h_rows, const long[::1] h_cols, const cplx[::1] h_vals,
                  const double[::1] s, const cplx[::1] drift,
                  const long[:, ::1] plus, const long[:, ::1] minus,
                  const double[:, ::1] cup, const cplx[:, ::1] a, const cplx[:, ::1] b,
                  const cplx[:, ::1] fold, int num_threads=1):
    cdef Py_ssize_t n_ado = y.shape[0]
    cdef Py_ssize_t dim = y.shape[1]
    cdef Py_ssize_t n_cor = plus.shape[1]
    cdef Py_ssize_t nnz = h_vals.shape[0]
    if dim > MAXDIM:
        raise ValueError("compiled kernel supports system dimension up to 16")
    if n_ado == 0:
        return dy
    with nogil:
        _rhs_all(&y[0, 0, 0], &dy[0, 0, 0], n_ado, dim, n_cor, nnz,
                 &h_rows[0] if nnz else NULL, &h_cols[0] if nnz else NULL,
                 <const double*> &h_vals[0] if nnz else NULL,
                 &s[0], <const double*> &drift[0],
                 &plus[0, 0] if n_cor else NULL, &minus[0, 0] if n_cor else NULL,
                 &cup[0, 0] if n_cor else NULL,
                 <const double*> &a[0, 0] if n_cor else NULL,
                 <const double*> &b[0, 0] if n_cor else NULL,
                 <const double*> &fold[0, 0], num_threads)
    return dy


cdef void _rhs_all(const cplx* y, cplx* dy, Py_ssize_t n_ado, Py_ssize_t dim, Py_ssize_t n_cor,
                   Py_ssize_t nnz, const long* h_rows, const long* h_cols, const double* h_vals,
                   const double* s, const double* drift, const long* plus, const long* minus,
                   const double* cup, const double* a, const double* b, const double* fold,
                   int num_threads) noexcept nogil:
    cdef Py_ssize_t n
    for n in prange(n_ado, schedule="static", num_threads=num_threads):
        _rhs_one(n, <const double*> y, <double*> dy, dim, n_cor, nnz, h_rows, h_cols, h_vals,
                 s, drift, plus, minus, cup, a, b, fold)


cdef inline void _rhs_one(Py_ssize_t n, const double* y, double* dy, Py_ssize_t dim,
                          Py_ssize_t n_cor, Py_ssize_t nnz, const long* h_rows,
                          const long* h_cols, const double* h_vals, const double* s,
                          const double* drift, const long* plus, const long* minus,
                          const double* cup, const double* a, const double* b,
                          const double* fold) noexcept nogil:
    cdef double acc[2 * MAXDIM * MAXDIM]
    cdef Py_ssize_t m = dim * dim
    cdef const double* rho = y + 2 * n * m
    cdef const double* nb
    cdef Py_ssize_t i, j, k, q, r, c, e
    cdef double dr = drift[2 * n], di = drift[2 * n + 1]
    cdef double gr, gi, xr, xi, hr, hi, fr, fi, wr, wi, ar, ai, br, bi, up

    # diagonal drift and folded fast modes
    for e in range(m):
        gr = dr + fold[2 * e]
        gi = di + fold[2 * e + 1]
        xr = rho[2 * e]
        xi = rho[2 * e + 1]
        acc[2 * e] = gr * xr - gi * xi
        acc[2 * e + 1] = gr * xi + gi * xr

    # -i [H, rho] from the sparse triplets: -i h (row r <- row c) and +i h (col c <- col r)
    for q in range(nnz):
        r = h_rows[q]
        c = h_cols[q]
        hr = h_vals[2 * q]
        hi = h_vals[2 * q + 1]
        for j in range(dim):
            xr = rho[2 * (c * dim + j)]
            xi = rho[2 * (c * dim + j) + 1]
            # (-i h) x = (hi - i hr)(xr + i xi)
            acc[2 * (r * dim + j)] += hi * xr + hr * xi
            acc[2 * (r * dim + j) + 1] += hi * xi - hr * xr
        for i in range(dim):
            xr = rho[2 * (i * dim + r)]
            xi = rho[2 * (i * dim + r) + 1]
            acc[2 * (i * dim + c)] -= hi * xr + hr * xi
            acc[2 * (i * dim + c) + 1] -= hi * xi - hr * xr

    for k in range(n_cor):
        q = plus[n * n_cor + k]
        if q >= 0:
            nb = y + 2 * q * m
            up = cup[n * n_cor + k]
            for i in range(dim):
                for j in range(dim):
                    e = i * dim + j
                    # -i up (s_i - s_j) x
                    wr = up * (s[i] - s[j])
                    acc[2 * e] += wr * nb[2 * e + 1]
                    acc[2 * e + 1] -= wr * nb[2 * e]
        q = minus[n * n_cor + k]
        if q >= 0:
            nb = y + 2 * q * m
            ar = a[2 * (n * n_cor + k)]
            ai = a[2 * (n * n_cor + k) + 1]
            br = b[2 * (n * n_cor + k)]
            bi = b[2 * (n * n_cor + k) + 1]
            for i in range(dim):
                for j in range(dim):
                    e = i * dim + j
                    # -i (a s_i - b s_j) x
                    fr = ar * s[i] - br * s[j]
                    fi = ai * s[i] - bi * s[j]
                    xr = nb[2 * e]
                    xi = nb[2 * e + 1]
                    wr = fr * xr - fi * xi
                    wi = fr * xi + fi * xr
                    acc[2 * e] += wi
                    acc[2 * e + 1] -= wr

    for e in range(2 * m):
        dy[2 * n * m + e] = acc[e]
