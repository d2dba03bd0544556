# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel core: compensated reductions and lattice stencils.

Every reduction uses Neumaier's variant of Kahan summation so that norms and
energies are accurate to a few ulp independent of length.  The module mirrors
the API of ``dmsoliton._kernels_py``; the package selects one of the two at
import time.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs

cnp.import_array()

BACKEND = "cython"


cdef inline double _neum_step(double s, double x, double* comp) nogil:
    cdef double t = s + x
    if fabs(s) >= fabs(x):
        comp[0] += (s - t) + x
    else:
        comp[0] += (x - t) + s
    return t


def sum_compensated(cnp.ndarray x_in):
    cdef const double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double s = 0.0, c = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        s = _neum_step(s, x[i], &c)
    return s + c


def l2_norm_sq(cnp.ndarray z_in):
    cdef const double complex[::1] z = np.ascontiguousarray(z_in, dtype=np.complex128)
    cdef double s = 0.0, c = 0.0
    cdef double re, im
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        re = z[i].real
        im = z[i].imag
        s = _neum_step(s, re * re + im * im, &c)
    return s + c


def inner(cnp.ndarray f_in, cnp.ndarray g_in):
    if f_in.shape[0] != g_in.shape[0]:
        raise ValueError("inner: shape mismatch")
    cdef const double complex[::1] f = np.ascontiguousarray(f_in, dtype=np.complex128)
    cdef const double complex[::1] g = np.ascontiguousarray(g_in, dtype=np.complex128)
    cdef double sr = 0.0, cr = 0.0, si = 0.0, ci = 0.0
    cdef double fr, fi, gr, gi
    cdef Py_ssize_t i
    for i in range(f.shape[0]):
        fr = f[i].real; fi = f[i].imag
        gr = g[i].real; gi = g[i].imag
        sr = _neum_step(sr, fr * gr + fi * gi, &cr)
        si = _neum_step(si, fr * gi - fi * gr, &ci)
    return complex(sr + cr, si + ci)


def abs_pow_sum(cnp.ndarray z_in, double p):
    cdef const double complex[::1] z = np.ascontiguousarray(z_in, dtype=np.complex128)
    cdef double s = 0.0, c = 0.0, a
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        a = sqrt(z[i].real * z[i].real + z[i].imag * z[i].imag)
        if a > 0.0:
            s = _neum_step(s, pow(a, p), &c)
    return s + c


def abs_max(cnp.ndarray z_in):
    cdef const double complex[::1] z = np.ascontiguousarray(z_in, dtype=np.complex128)
    cdef double m = 0.0, a
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        a = sqrt(z[i].real * z[i].real + z[i].imag * z[i].imag)
        if a > m:
            m = a
    return m


def laplacian(cnp.ndarray z_in):
    cdef const double complex[::1] z = np.ascontiguousarray(z_in, dtype=np.complex128)
    cdef Py_ssize_t n = z.shape[0], k
    out_arr = np.zeros(n + 2, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    for k in range(n):
        out[k] = out[k] + z[k]
        out[k + 1] = out[k + 1] - 2.0 * z[k]
        out[k + 2] = out[k + 2] + z[k]
    return out_arr


def forward_diff(cnp.ndarray z_in):
    cdef const double complex[::1] z = np.ascontiguousarray(z_in, dtype=np.complex128)
    cdef Py_ssize_t n = z.shape[0], k
    out_arr = np.zeros(n + 2, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    for k in range(n):
        out[k] = out[k] + z[k]
        out[k + 1] = out[k + 1] - z[k]
    return out_arr


def backward_diff(cnp.ndarray z_in):
    cdef const double complex[::1] z = np.ascontiguousarray(z_in, dtype=np.complex128)
    cdef Py_ssize_t n = z.shape[0], k
    out_arr = np.zeros(n + 2, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    for k in range(n):
        out[k + 1] = out[k + 1] + z[k]
        out[k + 2] = out[k + 2] - z[k]
    return out_arr


cdef inline double _pow_half(double a2, double half) nogil:
    # a^s written as (a^2)^(s/2); integer half-exponents become multiplies
    if half == 2.0:
        return a2 * a2
    if half == 3.0:
        return a2 * a2 * a2
    if half == 1.0:
        return a2
    if half == 4.0:
        return (a2 * a2) * (a2 * a2)
    return pow(a2, half)


def nonlin_value_sum(cnp.ndarray u_in, cnp.ndarray w_in,
                     cnp.ndarray coeffs_in, cnp.ndarray expos_in):
    cdef const double complex[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.complex128)
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const double[::1] coeffs = np.ascontiguousarray(coeffs_in, dtype=np.float64)
    cdef const double[::1] expos = np.ascontiguousarray(expos_in, dtype=np.float64)
    cdef Py_ssize_t nj = u.shape[0], nx = u.shape[1], nt = coeffs.shape[0]
    cdef Py_ssize_t j, x, t
    cdef double total = 0.0, ctot = 0.0
    cdef double row, crow, a2, v
    for j in range(nj):
        row = 0.0
        crow = 0.0
        for x in range(nx):
            a2 = u[j, x].real * u[j, x].real + u[j, x].imag * u[j, x].imag
            if a2 > 0.0:
                v = 0.0
                for t in range(nt):
                    v += coeffs[t] * _pow_half(a2, 0.5 * expos[t])
                row = _neum_step(row, v, &crow)
        total = _neum_step(total, w[j] * (row + crow), &ctot)
    return total + ctot


def nonlin_apply_p(cnp.ndarray u_in, cnp.ndarray coeffs_in, cnp.ndarray expos_in):
    cdef const double complex[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.complex128)
    cdef const double[::1] coeffs = np.ascontiguousarray(coeffs_in, dtype=np.float64)
    cdef const double[::1] expos = np.ascontiguousarray(expos_in, dtype=np.float64)
    cdef Py_ssize_t nj = u.shape[0], nx = u.shape[1], nt = coeffs.shape[0]
    cdef Py_ssize_t j, x, t
    cdef double a2, mult
    out_arr = np.empty((nj, nx), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    for j in range(nj):
        for x in range(nx):
            a2 = u[j, x].real * u[j, x].real + u[j, x].imag * u[j, x].imag
            mult = 0.0
            if a2 > 0.0:
                for t in range(nt):
                    mult += coeffs[t] * expos[t] * _pow_half(a2, 0.5 * expos[t] - 1.0)
            out[j, x] = mult * u[j, x]
    return out_arr
