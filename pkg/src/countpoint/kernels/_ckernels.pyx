# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled conv + max-pool kernels. Same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


cdef void _conv_row(const real* x, Py_ssize_t width, Py_ssize_t k, const real* w, real bias,
                    real* out, Py_ssize_t cw) noexcept nogil:
    """One row of the valid correlation, column-contiguous so the compiler can vectorize."""
    cdef Py_ssize_t c, ky, kx
    cdef real wk
    cdef const real* src
    for c in range(cw):
        out[c] = bias
    for ky in range(k):
        for kx in range(k):
            wk = w[ky * k + kx]
            src = x + ky * width + kx
            for c in range(cw):
                out[c] += wk * src[c]


cdef void _forward(const real[:, :, ::1] xv, const real[:, :, ::1] wv, const real[::1] bv,
                   real[:, :, :, ::1] pv, unsigned char[:, :, :, ::1] av, real* rows) noexcept nogil:
    cdef Py_ssize_t n = xv.shape[0], nf = wv.shape[0], k = wv.shape[1]
    cdef Py_ssize_t ph = pv.shape[2], pw = pv.shape[3], width = xv.shape[2]
    cdef Py_ssize_t cw = width - k + 1
    cdef Py_ssize_t s, f, i, j, q
    cdef real best, v
    cdef unsigned char besti
    cdef real* r0 = rows
    cdef real* r1 = rows + cw
    for s in range(n):
        for f in range(nf):
            for i in range(ph):
                _conv_row(&xv[s, 2 * i, 0], width, k, &wv[f, 0, 0], bv[f], r0, cw)
                _conv_row(&xv[s, 2 * i + 1, 0], width, k, &wv[f, 0, 0], bv[f], r1, cw)
                for j in range(pw):
                    # window order (0,0), (0,1), (1,0), (1,1); first maximum wins
                    best = r0[2 * j]
                    besti = 0
                    v = r0[2 * j + 1]
                    if v > best:
                        best = v
                        besti = 1
                    v = r1[2 * j]
                    if v > best:
                        best = v
                        besti = 2
                    v = r1[2 * j + 1]
                    if v > best:
                        best = v
                        besti = 3
                    pv[s, f, i, j] = best
                    av[s, f, i, j] = besti


cdef void _backward(const real[:, :, ::1] xv, const real[:, :, :, ::1] dv,
                    const unsigned char[:, :, :, ::1] av, double[:, :, ::1] dwv,
                    double[::1] dbv) noexcept nogil:
    cdef Py_ssize_t n = dv.shape[0], nf = dv.shape[1], ph = dv.shape[2], pw = dv.shape[3]
    cdef Py_ssize_t k = dwv.shape[1]
    cdef Py_ssize_t s, f, i, j, ky, kx, r0, c0
    cdef double g
    for s in range(n):
        for f in range(nf):
            for i in range(ph):
                for j in range(pw):
                    g = dv[s, f, i, j]
                    if g == 0.0:
                        continue
                    r0 = 2 * i + av[s, f, i, j] // 2
                    c0 = 2 * j + av[s, f, i, j] % 2
                    dbv[f] += g
                    for ky in range(k):
                        for kx in range(k):
                            dwv[f, ky, kx] += g * xv[s, r0 + ky, c0 + kx]


def conv_pool_forward(x, w, b):
    dtype = np.result_type(x, w)
    x = np.ascontiguousarray(x, dtype=dtype)
    w = np.ascontiguousarray(w, dtype=dtype)
    b = np.ascontiguousarray(b, dtype=dtype)
    n, h, wd = x.shape
    k = w.shape[1]
    ph, pw = (h - k + 1) // 2, (wd - k + 1) // 2
    pooled = np.empty((n, w.shape[0], ph, pw), dtype=dtype)
    argmax = np.empty((n, w.shape[0], ph, pw), dtype=np.uint8)
    cdef unsigned char[:, :, :, ::1] av = argmax
    cdef float[:, :, ::1] xf, wf
    cdef float[::1] bf
    cdef float[:, :, :, ::1] pf
    cdef double[:, :, ::1] xd, wd_
    cdef double[::1] bd
    cdef double[:, :, :, ::1] pd
    rows = np.empty(2 * (wd - k + 1), dtype=dtype)
    cdef float[::1] rf
    cdef double[::1] rd
    if dtype == np.float32:
        xf, wf, bf, pf, rf = x, w, b, pooled, rows
        with nogil:
            _forward[float](xf, wf, bf, pf, av, &rf[0])
    elif dtype == np.float64:
        xd, wd_, bd, pd, rd = x, w, b, pooled, rows
        with nogil:
            _forward[double](xd, wd_, bd, pd, av, &rd[0])
    else:
        raise TypeError("unsupported dtype %s" % dtype)
    return pooled, argmax


def conv_pool_backward(x, dz, argmax, int kernel=3):
    dtype = np.result_type(x, dz)
    x = np.ascontiguousarray(x, dtype=dtype)
    dz = np.ascontiguousarray(dz, dtype=dtype)
    cdef const unsigned char[:, :, :, ::1] av = np.ascontiguousarray(argmax, dtype=np.uint8)
    nf = dz.shape[1]
    dw = np.zeros((nf, kernel, kernel), dtype=np.float64)
    db = np.zeros(nf, dtype=np.float64)
    cdef double[:, :, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef float[:, :, ::1] xf
    cdef float[:, :, :, ::1] df
    cdef double[:, :, ::1] xd
    cdef double[:, :, :, ::1] dd
    if dtype == np.float32:
        xf, df = x, dz
        with nogil:
            _backward[float](xf, df, av, dwv, dbv)
    elif dtype == np.float64:
        xd, dd = x, dz
        with nogil:
            _backward[double](xd, dd, av, dwv, dbv)
    else:
        raise TypeError("unsupported dtype %s" % dtype)
    return dw.astype(dtype, copy=False), db.astype(dtype, copy=False)
