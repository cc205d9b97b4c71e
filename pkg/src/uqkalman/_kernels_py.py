"""Pure-Python reference implementation of the hot integration kernels.

Mirrors the signatures of the compiled ``_kernels`` extension exactly; the
backend is chosen in :mod:`uqkalman._backend`.
"""
import numpy as np

from .odeint import drive


def riccati(a, s, w, x0, nodes, rel_tol, abs_tol, max_steps, h0):
    """Integrate ``X' = A X + X A^T - X S X + W`` from ``X(0) = x0``.

    Returns the raw (not re-symmetrized) node values, shape ``(M + 1, n, n)``.
    """
    a = np.ascontiguousarray(a, dtype=float)
    s = np.ascontiguousarray(s, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    n = a.shape[0]
    at = a.T.copy()

    def rhs(_j, _t, y):
        x = y.reshape(n, n)
        return (a @ x + x @ at - x @ s @ x + w).ravel()

    out = drive(rhs, np.asarray(x0, dtype=float).ravel(), nodes, rel_tol, abs_tol, max_steps, h0)
    return out.reshape(len(nodes), n, n)


def affine(a, c, gain, y, u, x0, nodes, rel_tol, abs_tol, max_steps, h0):
    """Integrate ``x' = A x + K(t) (y(t) - C x) + u(t)``.

    ``gain`` (``(M + 1, n, r)``), ``y`` (``(M + 1, r)``) and ``u``
    (``(M + 1, n)``) are node samples interpolated linearly inside each grid
    interval. ``gain`` or ``u`` may be ``None`` to drop the respective term.
    """
    a = np.ascontiguousarray(a, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    nodes = np.asarray(nodes, dtype=float)

    def weights(j, t):
        w = (t - nodes[j]) / (nodes[j + 1] - nodes[j])
        return 1.0 - w, w

    def rhs(j, t, x):
        lo, hi = weights(j, t)
        dx = a @ x
        if gain is not None:
            k = lo * gain[j] + hi * gain[j + 1]
            yt = lo * y[j] + hi * y[j + 1]
            dx = dx + k @ (yt - c @ x)
        if u is not None:
            dx = dx + (lo * u[j] + hi * u[j + 1])
        return dx

    return drive(rhs, np.asarray(x0, dtype=float), nodes, rel_tol, abs_tol, max_steps, h0)
