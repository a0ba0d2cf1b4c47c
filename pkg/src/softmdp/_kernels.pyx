# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and summation order as ``_pykernels``."""

import numpy as np
from libc.math cimport exp, log

BACKEND = "cython"

cdef double EXP_FLOOR = -800.0


cdef inline double _shifted_exp(double d, double eta) noexcept nogil:
    if d < EXP_FLOOR * eta:
        d = EXP_FLOOR * eta
    return exp(d / eta)


cdef inline void _q_row(const double[:, ::1] r, const double[:, :, ::1] p, double gamma,
                        const double[::1] v, Py_ssize_t s, double[::1] out) noexcept nogil:
    cdef Py_ssize_t a, t, n = p.shape[2]
    cdef double acc
    for a in range(p.shape[1]):
        acc = 0.0
        for t in range(n):
            acc = acc + p[s, a, t] * v[t]
        out[a] = r[s, a] + gamma * acc


cdef inline double _lse(const double[::1] x, Py_ssize_t n, double eta,
                        const double[:, ::1] prior, Py_ssize_t s, bint weighted) noexcept nogil:
    cdef Py_ssize_t a
    cdef double m = x[0], acc = 0.0, e
    for a in range(1, n):
        if x[a] > m:
            m = x[a]
    for a in range(n):
        e = _shifted_exp(x[a] - m, eta)
        if weighted:
            e = prior[s, a] * e
        acc = acc + e
    return m + eta * log(acc)


def q_from_v(rewards, transitions, double gamma, v):
    cdef const double[:, ::1] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef const double[:, :, ::1] p = np.ascontiguousarray(transitions, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty((r.shape[0], r.shape[1]))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t s
    with nogil:
        for s in range(r.shape[0]):
            _q_row(r, p, gamma, vv, s, o[s])
    return out


def lse_rows(x, double eta, prior=None):
    cdef const double[:, ::1] xx = np.ascontiguousarray(x, dtype=np.float64)
    cdef bint weighted = prior is not None
    cdef const double[:, ::1] w = np.ascontiguousarray(prior if weighted else x, dtype=np.float64)
    out = np.empty(xx.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t s
    with nogil:
        for s in range(xx.shape[0]):
            o[s] = _lse(xx[s], xx.shape[1], eta, w, s, weighted)
    return out


def optimal_backup(rewards, transitions, double gamma, v, int kind, double eta, prior=None):
    cdef const double[:, ::1] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef const double[:, :, ::1] p = np.ascontiguousarray(transitions, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef bint weighted = kind == 2
    cdef const double[:, ::1] w = np.ascontiguousarray(prior if weighted else rewards, dtype=np.float64)
    cdef Py_ssize_t ns = r.shape[0], na = r.shape[1], s, a
    out = np.empty(ns)
    cdef double[::1] o = out
    cdef double[::1] x = np.empty(na)
    cdef double m
    with nogil:
        for s in range(ns):
            _q_row(r, p, gamma, vv, s, x)
            if kind == 0:
                m = x[0]
                for a in range(1, na):
                    if x[a] > m:
                        m = x[a]
                o[s] = m
            else:
                o[s] = _lse(x, na, eta, w, s, weighted)
    return out


cdef inline double _soft_value(const double[:, ::1] q, const double[:, ::1] pi, int kind,
                               double eta, const double[:, ::1] prior, Py_ssize_t s) noexcept nogil:
    cdef Py_ssize_t a
    cdef double acc = 0.0, pa, val
    for a in range(q.shape[1]):
        pa = pi[s, a]
        if pa > 0:
            if kind == 1:
                val = q[s, a] - eta * log(pa)
            elif kind == 2:
                val = q[s, a] - eta * log(pa / prior[s, a])
            else:
                val = q[s, a]
            acc = acc + pa * val
        else:
            acc = acc + 0.0
    return acc


def soft_values(q, pi, int kind, double eta, prior=None):
    cdef const double[:, ::1] qq = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, ::1] pp = np.ascontiguousarray(pi, dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(prior if kind == 2 else pi, dtype=np.float64)
    out = np.empty(qq.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t s
    with nogil:
        for s in range(qq.shape[0]):
            o[s] = _soft_value(qq, pp, kind, eta, w, s)
    return out


def soft_bellman_backup(rewards, transitions, double gamma, q, pi, int kind, double eta, prior=None):
    return q_from_v(rewards, transitions, gamma, soft_values(q, pi, kind, eta, prior))


def softmax_rows(q, double eta, prior=None):
    cdef const double[:, ::1] qq = np.ascontiguousarray(q, dtype=np.float64)
    cdef bint weighted = prior is not None
    cdef const double[:, ::1] w = np.ascontiguousarray(prior if weighted else q, dtype=np.float64)
    cdef Py_ssize_t ns = qq.shape[0], na = qq.shape[1], s, a
    out = np.empty((ns, na))
    cdef double[:, ::1] o = out
    cdef double m, total, e
    with nogil:
        for s in range(ns):
            m = qq[s, 0]
            for a in range(1, na):
                if qq[s, a] > m:
                    m = qq[s, a]
            for a in range(na):
                e = _shifted_exp(qq[s, a] - m, eta)
                if weighted:
                    e = w[s, a] * e
                o[s, a] = e
            total = 0.0
            for a in range(na):
                total = total + o[s, a]
            for a in range(na):
                o[s, a] = o[s, a] / total
    return out


def policy_aggregates(rewards, transitions, pi, int kind, double eta, prior=None):
    cdef const double[:, ::1] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef const double[:, :, ::1] p = np.ascontiguousarray(transitions, dtype=np.float64)
    cdef const double[:, ::1] pp = np.ascontiguousarray(pi, dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(prior if kind == 2 else pi, dtype=np.float64)
    cdef Py_ssize_t ns = r.shape[0], na = r.shape[1], s, a, t
    r_out = np.empty(ns)
    p_out = np.zeros((ns, ns))
    zero_q = np.zeros((ns, na))
    cdef const double[:, ::1] zq = zero_q
    cdef double[::1] ro = r_out
    cdef double[:, ::1] po = p_out
    cdef double acc, pa
    with nogil:
        for s in range(ns):
            acc = 0.0
            for a in range(na):
                pa = pp[s, a]
                if pa > 0:
                    acc = acc + pa * r[s, a]
                else:
                    acc = acc + 0.0
                for t in range(ns):
                    po[s, t] = po[s, t] + pa * p[s, a, t]
            if kind != 0:
                acc = acc + _soft_value(zq, pp, kind, eta, w, s)
            ro[s] = acc
    return r_out, p_out
