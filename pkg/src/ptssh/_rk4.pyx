# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled classical RK4 steps for ``dpsi/dt = -i H psi`` with tridiagonal H.

Complex vectors are handled as interleaved (re, im) doubles so that the
inner loops are plain real arithmetic.  The loop runs without the GIL.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _site(const double* d, const double* x, const double* psi,
                       double* nxt, double* acc, double c_next, double w_acc,
                       Py_ssize_t j, double hr, double hi) noexcept nogil:
    # hr, hi already hold the hopping terms; add the onsite term and write outputs
    hr += d[2*j] * x[2*j] - d[2*j+1] * x[2*j+1]
    hi += d[2*j] * x[2*j+1] + d[2*j+1] * x[2*j]
    nxt[2*j] = psi[2*j] + c_next * hi
    nxt[2*j+1] = psi[2*j+1] - c_next * hr
    acc[2*j] += w_acc * hi
    acc[2*j+1] -= w_acc * hr


cdef inline void _stage(const double* d, const double* o, const double* x,
                        const double* psi, double* nxt, double* acc,
                        double c_next, double w_acc, Py_ssize_t n) noexcept nogil:
    # with k = -i H x: nxt = psi + c_next*k ; acc += w_acc*k
    cdef Py_ssize_t j
    if n == 1:
        _site(d, x, psi, nxt, acc, c_next, w_acc, 0, 0.0, 0.0)
        return
    _site(d, x, psi, nxt, acc, c_next, w_acc, 0, o[0] * x[2], o[0] * x[3])
    for j in range(1, n - 1):
        _site(d, x, psi, nxt, acc, c_next, w_acc, j,
              o[j-1] * x[2*j-2] + o[j] * x[2*j+2],
              o[j-1] * x[2*j-1] + o[j] * x[2*j+3])
    j = n - 1
    _site(d, x, psi, nxt, acc, c_next, w_acc, j, o[j-1] * x[2*j-2], o[j-1] * x[2*j-1])


cdef void _run(const double* d, const double* o, double* psi,
               double* x1, double* x2, double* acc, double h,
               Py_ssize_t n_steps, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t step, j
    cdef double h6 = h / 6.0
    for step in range(n_steps):
        for j in range(2 * n):
            acc[j] = 0.0
        _stage(d, o, psi, psi, x1, acc, 0.5 * h, 1.0, n)
        _stage(d, o, x1, psi, x2, acc, 0.5 * h, 2.0, n)
        _stage(d, o, x2, psi, x1, acc, h, 2.0, n)
        _stage(d, o, x1, psi, x2, acc, 0.0, 1.0, n)
        for j in range(2 * n):
            psi[j] += h6 * acc[j]


def propagate(diag, off, psi, double h, Py_ssize_t n_steps):
    """Advance ``psi`` in place by ``n_steps`` RK4 steps of size ``h``."""
    cdef Py_ssize_t n = psi.shape[0]
    if diag.shape[0] != n or off.shape[0] != n - 1:
        raise ValueError("band lengths do not match psi")
    if psi.dtype != np.complex128 or not psi.flags.c_contiguous:
        raise TypeError("psi must be a contiguous complex128 array")
    cdef double[::1] dv = np.ascontiguousarray(diag, dtype=np.complex128).view(np.float64)
    cdef double[::1] ov = np.ascontiguousarray(off, dtype=np.float64)
    cdef double[::1] pv = psi.view(np.float64)
    work = np.zeros((3, 2 * n), dtype=np.float64)
    cdef double[:, ::1] wv = work
    if n_steps <= 0:
        return psi
    with nogil:
        _run(&dv[0], &ov[0] if n > 1 else NULL, &pv[0], &wv[0, 0], &wv[1, 0],
             &wv[2, 0], h, n_steps, n)
    return psi
