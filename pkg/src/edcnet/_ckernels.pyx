# Compiled versions of the hot loops in _pykernels.py. Signatures must match.
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()


def splat_images(const double[::1] delays, const double[::1] amps,
                 const long long[::1] orders, const double[:, ::1] power_table,
                 double[:, ::1] out):
    cdef Py_ssize_t m, b, i0
    cdef Py_ssize_t n_img = delays.shape[0]
    cdef Py_ssize_t n_bands = out.shape[0]
    cdef Py_ssize_t n = out.shape[1]
    cdef double frac, g, t
    with nogil:
        for m in range(n_img):
            t = delays[m]
            i0 = <Py_ssize_t>floor(t)
            if i0 >= n:
                continue
            frac = t - i0
            for b in range(n_bands):
                g = amps[m] * power_table[b, orders[m]]
                out[b, i0] += g * (1.0 - frac)
                if i0 + 1 < n:
                    out[b, i0 + 1] += g * frac
    return np.asarray(out)


def tail_energy(signal):
    cdef const double[::1] s = np.ascontiguousarray(signal, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0]
    res = np.empty(n, dtype=np.float64)
    cdef double[::1] r = res
    cdef double acc = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(n - 1, -1, -1):
            acc = acc + s[i] * s[i]
            r[i] = acc
    return res


def sticky_signs(first, uniforms, double p):
    cdef const double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = u.shape[0]
    res = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] r = res
    cdef double cur = float(first)
    cdef Py_ssize_t i
    r[0] = cur
    with nogil:
        for i in range(n):
            if u[i] >= p:
                cur = -cur
            r[i + 1] = cur
    return res


def render_frames(values, env, bounds):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] e = np.ascontiguousarray(env, dtype=np.float64)
    cdef const long long[::1] bd = np.ascontiguousarray(bounds, dtype=np.int64)
    cdef Py_ssize_t n_frames = e.shape[0]
    cdef Py_ssize_t total = bd[bd.shape[0] - 1]
    res = np.zeros(total, dtype=np.float64)
    cdef double[::1] r = res
    cdef Py_ssize_t f, i, lo, hi
    cdef double width, energy, u, scale
    with nogil:
        for f in range(n_frames):
            lo = bd[f]
            hi = bd[f + 1]
            if hi <= lo:
                continue
            width = <double>(hi - lo)
            energy = 0.0
            for i in range(lo, hi):
                u = v[f] + ((i - lo) / width) * (v[f + 1] - v[f])
                r[i] = u
                energy = energy + u * u
            if energy > 0.0:
                scale = e[f] / sqrt(energy)
            else:
                scale = 0.0
            for i in range(lo, hi):
                r[i] = r[i] * scale
    return res
