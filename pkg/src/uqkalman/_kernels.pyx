# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels.

Same Dormand-Prince 5(4) stepper and step-size controller as
:func:`uqkalman.odeint.drive`, specialised to the two right-hand sides the
filters need. The GIL is released for the whole integration so ensemble
members can run on worker threads.
"""
import numpy as np

from libc.math cimport sqrt, fabs, pow, isfinite
from libc.stdlib cimport malloc, free

from .errors import NonConvergenceError, NumericalError

ctypedef void (*rhs_t)(void* ctx, Py_ssize_t j, double t, const double* y, double* out) noexcept nogil

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40
cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 5.0

cdef enum Status:
    OK = 0
    MAX_STEPS = 1
    NON_FINITE = 2
    UNDERFLOW = 3


cdef int dp54(rhs_t f, void* ctx, Py_ssize_t d, const double* nodes, Py_ssize_t num_nodes,
              double rtol, double atol, long max_steps, double h0,
              double* out, double* work, double* fail_t) noexcept nogil:
    cdef double* y = work
    cdef double* yn = work + d
    cdef double* tmp = work + 2 * d
    cdef double* k1 = work + 3 * d
    cdef double* k2 = work + 4 * d
    cdef double* k3 = work + 5 * d
    cdef double* k4 = work + 6 * d
    cdef double* k5 = work + 7 * d
    cdef double* k6 = work + 8 * d
    cdef double* k7 = work + 9 * d
    cdef double* swap
    cdef Py_ssize_t i, j
    cdef long steps = 0
    cdef double t = nodes[0], t_next, t_new, remaining, hs, h = h0
    cdef double err, e, sc, fac, h_new
    cdef bint last

    for i in range(d):
        y[i] = out[i]
    f(ctx, 0, t, y, k1)
    for i in range(d):
        if not isfinite(k1[i]):
            fail_t[0] = t
            return NON_FINITE

    for j in range(num_nodes - 1):
        t_next = nodes[j + 1]
        while t < t_next:
            remaining = t_next - t
            last = h >= remaining
            hs = remaining if last else h
            steps += 1
            if steps > max_steps:
                fail_t[0] = t
                return MAX_STEPS
            for i in range(d):
                tmp[i] = y[i] + hs * (A21 * k1[i])
            f(ctx, j, t + C2 * hs, tmp, k2)
            for i in range(d):
                tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
            f(ctx, j, t + C3 * hs, tmp, k3)
            for i in range(d):
                tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            f(ctx, j, t + C4 * hs, tmp, k4)
            for i in range(d):
                tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            f(ctx, j, t + C5 * hs, tmp, k5)
            for i in range(d):
                tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                      + A64 * k4[i] + A65 * k5[i])
            f(ctx, j, t + hs, tmp, k6)
            for i in range(d):
                yn[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                     + A75 * k5[i] + A76 * k6[i])
            t_new = t_next if last else t + hs
            f(ctx, j, t_new, yn, k7)
            err = 0.0
            for i in range(d):
                e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                          + E6 * k6[i] + E7 * k7[i])
                sc = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
                err += (e / sc) * (e / sc)
            err = sqrt(err / d)
            if not isfinite(err):
                fail_t[0] = t
                return NON_FINITE
            if err <= 1.0:
                if err == 0.0:
                    fac = FAC_MAX
                else:
                    fac = SAFETY * pow(err, -0.2)
                    if fac < FAC_MIN:
                        fac = FAC_MIN
                    if fac > FAC_MAX:
                        fac = FAC_MAX
                h_new = hs * fac
                if last:
                    if h_new > h:
                        h = h_new
                else:
                    h = h_new
                t = t_new
                swap = y
                y = yn
                yn = swap
                swap = k1
                k1 = k7
                k7 = swap
            else:
                fac = SAFETY * pow(err, -0.2)
                if fac < FAC_MIN:
                    fac = FAC_MIN
                h = hs * fac
                if h <= 1e-14 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                    fail_t[0] = t
                    return UNDERFLOW
        for i in range(d):
            out[(j + 1) * d + i] = y[i]
    return OK


cdef struct RiccatiCtx:
    Py_ssize_t n
    const double* a
    const double* s
    const double* w
    double* xs


cdef void riccati_rhs(void* vctx, Py_ssize_t j, double t, const double* x, double* out) noexcept nogil:
    cdef RiccatiCtx* c = <RiccatiCtx*> vctx
    cdef Py_ssize_t n = c.n, i, k, l
    cdef double acc
    for i in range(n):
        for k in range(n):
            acc = 0.0
            for l in range(n):
                acc = acc + x[i * n + l] * c.s[l * n + k]
            c.xs[i * n + k] = acc
    for i in range(n):
        for k in range(n):
            acc = c.w[i * n + k]
            for l in range(n):
                acc = acc + c.a[i * n + l] * x[l * n + k] + x[i * n + l] * c.a[k * n + l] \
                    - c.xs[i * n + l] * x[l * n + k]
            out[i * n + k] = acc


cdef struct AffineCtx:
    Py_ssize_t n
    Py_ssize_t r
    const double* a
    const double* c
    const double* gain
    const double* y
    const double* u
    const double* nodes
    double* innov


cdef void affine_rhs(void* vctx, Py_ssize_t j, double t, const double* x, double* out) noexcept nogil:
    cdef AffineCtx* c = <AffineCtx*> vctx
    cdef Py_ssize_t n = c.n, r = c.r, i, k, l
    cdef double w = (t - c.nodes[j]) / (c.nodes[j + 1] - c.nodes[j])
    cdef double lo = 1.0 - w, acc
    cdef const double* g0
    cdef const double* g1
    if c.gain != NULL:
        for k in range(r):
            acc = lo * c.y[j * r + k] + w * c.y[(j + 1) * r + k]
            for l in range(n):
                acc = acc - c.c[k * n + l] * x[l]
            c.innov[k] = acc
    for i in range(n):
        acc = 0.0
        for l in range(n):
            acc = acc + c.a[i * n + l] * x[l]
        if c.gain != NULL:
            g0 = c.gain + j * n * r + i * r
            g1 = g0 + n * r
            for k in range(r):
                acc = acc + (lo * g0[k] + w * g1[k]) * c.innov[k]
        if c.u != NULL:
            acc = acc + lo * c.u[j * n + i] + w * c.u[(j + 1) * n + i]
        out[i] = acc


cdef _raise(int status, double t, long max_steps):
    if status == MAX_STEPS:
        raise NonConvergenceError(f"exceeded max_steps = {max_steps} at t = {t}", time=t)
    if status == NON_FINITE:
        raise NumericalError(f"non-finite derivative near t = {t}", time=t)
    if status == UNDERFLOW:
        raise NonConvergenceError(f"step size underflow at t = {t}", time=t)


def _flat(x):
    return np.ascontiguousarray(x, dtype=np.float64).ravel()


def riccati(a, s, w, x0, nodes, double rel_tol, double abs_tol, long max_steps, double h0):
    """Integrate ``X' = A X + X A^T - X S X + W`` from ``X(0) = x0``."""
    cdef const double[::1] av = _flat(a), sv = _flat(s), wv = _flat(w), tv = _flat(nodes)
    cdef Py_ssize_t n = np.shape(a)[0], d = n * n, num = tv.shape[0]
    result = np.empty((num, n, n))
    result.reshape(-1)[:d] = _flat(x0)
    cdef double[::1] ov = result.reshape(-1)
    cdef double fail_t = 0.0
    cdef int status
    cdef RiccatiCtx ctx
    cdef double* work = <double*> malloc((10 * d + d) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    ctx.n = n
    ctx.a = &av[0]
    ctx.s = &sv[0]
    ctx.w = &wv[0]
    ctx.xs = work + 10 * d
    try:
        with nogil:
            status = dp54(riccati_rhs, &ctx, d, &tv[0], num, rel_tol, abs_tol, max_steps, h0,
                          &ov[0], work, &fail_t)
    finally:
        free(work)
    _raise(status, fail_t, max_steps)
    return result


def affine(a, c, gain, y, u, x0, nodes, double rel_tol, double abs_tol, long max_steps, double h0):
    """Integrate ``x' = A x + K(t) (y(t) - C x) + u(t)`` with piecewise-linear inputs."""
    cdef const double[::1] av = _flat(a), tv = _flat(nodes)
    cdef Py_ssize_t n = np.shape(a)[0], num = tv.shape[0]
    cdef Py_ssize_t r = np.shape(c)[0] if gain is not None else 0
    cdef const double[::1] cv = _flat(c) if gain is not None else np.zeros(1)
    cdef const double[::1] gv = _flat(gain) if gain is not None else np.zeros(1)
    cdef const double[::1] yv = _flat(y) if gain is not None else np.zeros(1)
    cdef const double[::1] uv = _flat(u) if u is not None else np.zeros(1)
    result = np.empty((num, n))
    result[0] = _flat(x0)
    cdef double[::1] ov = result.reshape(-1)
    cdef double fail_t = 0.0
    cdef int status
    cdef AffineCtx ctx
    cdef double* work = <double*> malloc((10 * n + r + 1) * sizeof(double))
    if work == NULL:
        raise MemoryError()
    ctx.n = n
    ctx.r = r
    ctx.a = &av[0]
    ctx.c = &cv[0]
    ctx.gain = &gv[0] if gain is not None else NULL
    ctx.y = &yv[0]
    ctx.u = &uv[0] if u is not None else NULL
    ctx.nodes = &tv[0]
    ctx.innov = work + 10 * n
    try:
        with nogil:
            status = dp54(affine_rhs, &ctx, n, &tv[0], num, rel_tol, abs_tol, max_steps, h0,
                          &ov[0], work, &fail_t)
    finally:
        free(work)
    _raise(status, fail_t, max_steps)
    return result
