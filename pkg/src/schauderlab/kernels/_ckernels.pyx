# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the pairwise and flux kernels (see ``_pykernels``)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, log, fabs

cnp.import_array()


cdef inline double _dist(const double[:, ::1] xs, const double[::1] ts, double c,
                         Py_ssize_t i, Py_ssize_t j) nogil:
    cdef Py_ssize_t a
    cdef double s = 0.0, r
    for a in range(xs.shape[1]):
        r = xs[i, a] - xs[j, a]
        s += r * r
    return sqrt(s) + sqrt(c * fabs(ts[i] - ts[j]))


cdef inline double _diff(const double[:, ::1] v, Py_ssize_t i, Py_ssize_t j) nogil:
    cdef Py_ssize_t a
    cdef double s = 0.0, r
    for a in range(v.shape[1]):
        r = v[i, a] - v[j, a]
        s += r * r
    return sqrt(s)


def pair_quotient_max(values, xs, ts, double c, double alpha, double min_gap):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(ts, dtype=np.float64)
    cdef Py_ssize_t m = v.shape[0], i, j
    cdef double best = 0.0, d, r
    cdef long long count = 0
    with nogil:
        for i in range(m - 1):
            for j in range(i + 1, m):
                d = _dist(x, t, c, i, j)
                if d >= min_gap and d > 0.0:
                    count += 1
                    r = _diff(v, i, j) / pow(d, alpha)
                    if r > best:
                        best = r
    return best, count


def pair_envelope(values, xs, ts, double c, double d_min, double d_max, Py_ssize_t nbins):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, ::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(ts, dtype=np.float64)
    out_max = np.zeros(nbins)
    out_dist = np.zeros(nbins)
    out_count = np.zeros(nbins, dtype=np.int64)
    cdef double[::1] bmax = out_max
    cdef double[::1] bdist = out_dist
    cdef long long[::1] bcount = out_count
    cdef Py_ssize_t m = v.shape[0], i, j, b
    cdef double lo = log(d_min), step = (log(d_max) - log(d_min)) / nbins, d, f
    with nogil:
        for i in range(m - 1):
            for j in range(i + 1, m):
                d = _dist(x, t, c, i, j)
                if d < d_min or d > d_max:
                    continue
                b = <Py_ssize_t>((log(d) - lo) / step)
                if b >= nbins:
                    b = nbins - 1
                bcount[b] += 1
                f = _diff(v, i, j)
                if f > bmax[b]:
                    bmax[b] = f
                    bdist[b] = d
    return out_max, out_dist, out_count


def element_flux(grads, coef, double mu, double p):
    cdef const double[:, :, ::1] g = np.ascontiguousarray(grads, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(np.broadcast_to(coef, (g.shape[0],)), dtype=np.float64)
    cdef Py_ssize_t ne = g.shape[0], nk = g.shape[1], nd = g.shape[2], e, i, j
    flux_arr = np.empty((ne, nk, nd))
    phi_arr = np.zeros(ne)
    dphi_arr = np.zeros(ne)
    cdef double[:, :, ::1] flux = flux_arr
    cdef double[::1] phi = phi_arr
    cdef double[::1] dphi = dphi_arr
    cdef double s, f, hp = 0.5 * (p - 2.0), hq = 0.5 * (p - 4.0)
    with nogil:
        for e in range(ne):
            s = mu * mu
            for i in range(nk):
                for j in range(nd):
                    s += g[e, i, j] * g[e, i, j]
            if s > 0.0:
                phi[e] = pow(s, hp)
                dphi[e] = (p - 2.0) * pow(s, hq)
            f = a[e] * phi[e]
            for i in range(nk):
                for j in range(nd):
                    flux[e, i, j] = f * g[e, i, j]
    return flux_arr, phi_arr, dphi_arr
