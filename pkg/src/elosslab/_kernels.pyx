# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors ``_kernels_py`` exactly in signature."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, fabs

cnp.import_array()

GROUND_TIE_TOL = 1e-9
cdef double GROUND_TIE_TOL_C = 1e-9


cdef inline double _coeff(double r, int scheme, double param) noexcept nogil:
    cdef double m
    if scheme == 0:
        return param
    elif scheme == 1:
        m = r if r > param else param
        return 1.0 / m
    elif scheme == 2:
        m = r if r > param else param
        return 1.0 / (m * m)
    else:
        return exp(-r / param)


cdef inline void _accumulate(const double* pred, const double* target, double* grad,
                             Py_ssize_t stride, double* value, Py_ssize_t i, Py_ssize_t j,
                             Py_ssize_t d, int scheme, double param, double eps2) noexcept nogil:
    # raw pointers with a row stride, so the three arrays may be interleaved;
    # memoryview arguments would pay an atomic refcount per call
    cdef Py_ssize_t c, a = i * stride, b = j * stride
    cdef double uu = 0.0, vv = 0.0, t, r, rhat, k, resid, w
    for c in range(d):
        t = pred[a + c] - pred[b + c]
        uu += t * t
        t = target[a + c] - target[b + c]
        vv += t * t
    r = sqrt(vv)
    rhat = sqrt(uu + eps2)
    k = _coeff(r, scheme, param)
    resid = r - rhat
    value[0] += k * resid * resid
    w = -2.0 * k * resid / rhat
    for c in range(d):
        t = w * (pred[a + c] - pred[b + c])
        grad[a + c] += t
        grad[b + c] -= t


def _check_scheme(int scheme):
    if scheme < 0 or scheme > 3:
        raise ValueError(f"unknown coefficient scheme {scheme}")


def pair_energy(pred, target, int scheme, double param, double eps):
    _check_scheme(scheme)
    cdef const double[:, :, ::1] p = np.ascontiguousarray(pred, dtype=np.float64)
    cdef const double[:, :, ::1] q = np.ascontiguousarray(target, dtype=np.float64)
    cdef Py_ssize_t B = p.shape[0], n = p.shape[1], d = p.shape[2]
    out_grad = np.zeros((B, n, d))
    out_val = np.zeros(B)
    cdef double[:, :, ::1] g = out_grad
    cdef double[::1] vals = out_val
    cdef Py_ssize_t s, i, j
    cdef double v
    cdef double eps2 = eps * eps
    with nogil:
        for s in range(B):
            v = 0.0
            for i in range(n):
                for j in range(i + 1, n):
                    _accumulate(&p[s, 0, 0], &q[s, 0, 0], &g[s, 0, 0], d, &v, i, j, d,
                                scheme, param, eps2)
            vals[s] = v
    return out_val, out_grad


def edge_energy(pred, target, edges, int scheme, double param, double eps):
    _check_scheme(scheme)
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] e = np.ascontiguousarray(edges, dtype=np.int64)
    cdef Py_ssize_t B = pred.shape[0], n = pred.shape[1], d = pred.shape[2], m = e.shape[0]
    # rows hold [pred | target | grad] of one node: edges hit random nodes,
    # and one row per endpoint keeps that to a single cache line or two
    packed = np.zeros((B, n, 3 * d))
    packed[:, :, :d] = pred
    packed[:, :, d:2 * d] = target
    out_val = np.zeros(B)
    cdef double[:, :, ::1] w = packed
    cdef double[::1] vals = out_val
    cdef Py_ssize_t s, k
    cdef double v
    cdef double eps2 = eps * eps
    cdef double* row
    with nogil:
        for s in range(B):
            v = 0.0
            row = &w[s, 0, 0]
            for k in range(m):
                _accumulate(row, row + d, row + 2 * d, 3 * d, &v, e[k, 0], e[k, 1], d,
                            scheme, param, eps2)
            vals[s] = v
    return out_val, np.ascontiguousarray(packed[:, :, 2 * d:])


cdef inline int _ctz(unsigned long long x) noexcept nogil:
    cdef int c = 0
    while (x & 1) == 0:
        x >>= 1
        c += 1
    return c


def ising_ground_state(jh, jv):
    """Gray-code enumeration; see ``_kernels_py.ising_ground_state``."""
    cdef const double[:, ::1] h_c = np.ascontiguousarray(jh, dtype=np.float64)
    cdef const double[:, ::1] v_c = np.ascontiguousarray(jv, dtype=np.float64)
    cdef int R = h_c.shape[0]
    cdef int C = h_c.shape[1] + 1
    cdef int n = R * C
    # neighbour tables, up to 4 per site
    nb_arr = np.full((n, 4), -1, dtype=np.int64)
    nj_arr = np.zeros((n, 4))
    cnt_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] nb = nb_arr
    cdef double[:, ::1] nj = nj_arr
    cdef cnp.int64_t[::1] cnt = cnt_arr
    cdef int r, c, a, b2
    for r in range(R):
        for c in range(C - 1):
            a = r * C + c
            b2 = a + 1
            nb[a, cnt[a]] = b2; nj[a, cnt[a]] = h_c[r, c]; cnt[a] += 1
            nb[b2, cnt[b2]] = a; nj[b2, cnt[b2]] = h_c[r, c]; cnt[b2] += 1
    for r in range(R - 1):
        for c in range(C):
            a = r * C + c
            b2 = a + C
            nb[a, cnt[a]] = b2; nj[a, cnt[a]] = v_c[r, c]; cnt[a] += 1
            nb[b2, cnt[b2]] = a; nj[b2, cnt[b2]] = v_c[r, c]; cnt[b2] += 1

    spin_arr = np.ones(n)
    field_arr = np.zeros(n)
    cdef double[::1] spin = spin_arr
    cdef double[::1] field = field_arr
    cdef unsigned long long total = 1ULL << (n - 1)
    cdef unsigned long long t, gray, best_b = 0
    cdef double energy, best, thresh, best_energy = 0.0
    cdef int k, site, q, nbr
    cdef int pass_no

    best = 0.0
    for pass_no in range(2):
        with nogil:
            for site in range(n):
                spin[site] = 1.0
            energy = 0.0
            for site in range(n):
                field[site] = 0.0
                for q in range(cnt[site]):
                    field[site] += nj[site, q]
            for site in range(n):
                energy -= 0.5 * spin[site] * field[site]
            gray = 0
            if pass_no == 0:
                best = energy
            else:
                thresh = best + GROUND_TIE_TOL_C
                best_b = total
                if energy <= thresh:
                    best_b = 0
                    best_energy = energy
            for t in range(1, total):
                k = _ctz(t)
                gray ^= (1ULL << k)
                site = k + 1
                energy += 2.0 * spin[site] * field[site]
                for q in range(cnt[site]):
                    nbr = nb[site, q]
                    field[nbr] -= 2.0 * nj[site, q] * spin[site]
                spin[site] = -spin[site]
                if pass_no == 0:
                    if energy < best:
                        best = energy
                elif energy <= thresh and gray < best_b:
                    best_b = gray
                    best_energy = energy
    return int(best_b), float(best_energy)
