# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels in ``pure``; same signatures.

The selection layer normalizes every input to a C-contiguous float64
ndarray, so the loops below can take flat memoryviews directly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1, pow

cnp.import_array()

BACKEND = "compiled"

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(16)
cdef double[16] GX
cdef double[16] GW
for _i in range(16):
    GX[_i] = _GAUSS_X[_i]
    GW[_i] = _GAUSS_W[_i]


cdef inline double smoothstep(double u) nogil:
    return ((6.0 * u - 15.0) * u + 10.0) * u * u * u


cdef inline double trunc_k(double t, double k) nogil:
    cdef double u = t - k
    if u <= 0.0:
        return 1.0
    if u >= 1.0:
        return 0.0
    return 1.0 - smoothstep(u)


def truncation_eval(t, double k):
    cdef double[::1] x = t.ravel()
    out = np.empty(t.size, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        o[i] = trunc_k(x[i], k)
    return out.reshape(t.shape)


def truncation_prime_eval(t, double k):
    cdef double[::1] x = t.ravel()
    out = np.empty(t.size, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double u
    for i in range(n):
        u = x[i] - k
        if u <= 0.0 or u >= 1.0:
            o[i] = 0.0
        else:
            o[i] = -30.0 * u * u * (u - 1.0) * (u - 1.0)
    return out.reshape(t.shape)


def truncation_integral_eval(rho, double k):
    cdef double[::1] x = rho.ravel()
    out = np.empty(rho.size, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double u
    for i in range(n):
        if x[i] <= k:
            o[i] = x[i]
        else:
            u = x[i] - k
            if u > 1.0:
                u = 1.0
            o[i] = k + u - ((u - 3.0) * u + 2.5) * u * u * u * u
    return out.reshape(rho.shape)


def pressure_base_eval(rho, double k, double gamma, double a1):
    cdef double[::1] x = rho.ravel()
    out = np.empty(rho.size, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, q, n = x.shape[0]
    cdef double upper, mid, half, acc, tq
    cdef double base = pow(k, gamma)
    for i in range(n):
        if x[i] <= k:
            o[i] = a1 * pow(x[i], gamma)
        else:
            upper = x[i]
            if upper > k + 1.0:
                upper = k + 1.0
            mid = 0.5 * (k + upper)
            half = 0.5 * (upper - k)
            acc = 0.0
            for q in range(16):
                tq = mid + half * GX[q]
                acc += GW[q] * gamma * pow(tq, gamma - 1.0) * trunc_k(tq, k)
            o[i] = a1 * (base + half * acc)
    return out.reshape(rho.shape)


def phi_eval(z, double eps, double m):
    cdef double[::1] x = z.ravel()
    out = np.empty(z.size, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        o[i] = (eps * x[i] + expm1(x[i]) + (eps / m) * expm1(m * x[i])
                + expm1((m + 1.0) * x[i]) / (m + 1.0))
    return out.reshape(z.shape)


def phi_prime_eval(z, double eps, double m):
    cdef double[::1] x = z.ravel()
    out = np.empty(z.size, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        o[i] = (1.0 + exp(m * x[i])) * (eps + exp(x[i]))
    return out.reshape(z.shape)


def upwind_div(u, v, c, double hx, double hy):
    cdef double[:, ::1] uu = u
    cdef double[:, ::1] vv = v
    cdef double[:, ::1] cc = c
    cdef Py_ssize_t nx = cc.shape[0], ny = cc.shape[1]
    out = np.zeros((nx, ny), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double f
    for i in range(1, nx):
        for j in range(ny):
            f = uu[i, j] * (cc[i - 1, j] if uu[i, j] > 0.0 else cc[i, j])
            o[i - 1, j] += f / hx
            o[i, j] -= f / hx
    for i in range(nx):
        for j in range(1, ny):
            f = vv[i, j] * (cc[i, j - 1] if vv[i, j] > 0.0 else cc[i, j])
            o[i, j - 1] += f / hy
            o[i, j] -= f / hy
    return out


def upwind_matrix(u, v, kfac, double hx, double hy):
    cdef double[:, ::1] uu = u
    cdef double[:, ::1] vv = v
    cdef double[:, ::1] kk = kfac
    cdef Py_ssize_t nx = kk.shape[0], ny = kk.shape[1]
    cdef Py_ssize_t nnz = 4 * ((nx - 1) * ny + nx * (ny - 1))
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    cdef cnp.int64_t[::1] r = rows
    cdef cnp.int64_t[::1] c = cols
    cdef double[::1] a = vals
    cdef Py_ssize_t i, j, p = 0
    cdef cnp.int64_t left, right, bot, top
    cdef double up, um, vp, vm
    for i in range(1, nx):
        for j in range(ny):
            left = (i - 1) * ny + j
            right = i * ny + j
            up = (uu[i, j] if uu[i, j] > 0.0 else 0.0) * kk[i - 1, j] / hx
            um = (uu[i, j] if uu[i, j] < 0.0 else 0.0) * kk[i, j] / hx
            r[p] = left;  c[p] = left;  a[p] = up;  p += 1
            r[p] = left;  c[p] = right; a[p] = um;  p += 1
            r[p] = right; c[p] = left;  a[p] = -up; p += 1
            r[p] = right; c[p] = right; a[p] = -um; p += 1
    for i in range(nx):
        for j in range(1, ny):
            bot = i * ny + (j - 1)
            top = i * ny + j
            vp = (vv[i, j] if vv[i, j] > 0.0 else 0.0) * kk[i, j - 1] / hy
            vm = (vv[i, j] if vv[i, j] < 0.0 else 0.0) * kk[i, j] / hy
            r[p] = bot; c[p] = bot; a[p] = vp;  p += 1
            r[p] = bot; c[p] = top; a[p] = vm;  p += 1
            r[p] = top; c[p] = bot; a[p] = -vp; p += 1
            r[p] = top; c[p] = top; a[p] = -vm; p += 1
    return rows, cols, vals
