"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature. The active
backend is picked once at import time: set ``MAXENT_DISABLE_NUMBA=1`` to
force the numpy path (useful for debugging and for platforms without numba).
Both variants stay importable as ``numpy_kernels`` / ``numba_kernels`` so the
test-suite and the benchmark can compare them directly.
"""

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("MAXENT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


# --------------------------------------------------------------------------
# numpy reference implementations
# --------------------------------------------------------------------------

def _np_hamiltonian(L, g, h, J, boundary_z):
    D = 1 << L
    states = np.arange(D)
    H = np.zeros((D, D))
    # site i (0-based from the left) lives in bit L-1-i; bit 0 is spin up
    spins = 1 - 2 * ((states[:, None] >> (L - 1 - np.arange(L))[None, :]) & 1)
    diag = h * spins.sum(axis=1) + J * (spins[:, :-1] * spins[:, 1:]).sum(axis=1)
    if boundary_z:
        diag = diag - J * (spins[:, 0] + spins[:, -1])
    H[states, states] = diag
    for i in range(L):
        H[states, states ^ (1 << (L - 1 - i))] += g
    return H


def _np_chebyshev_matrix(x, n):
    D = x.shape[0]
    out = np.empty((D, n))
    if n == 0:
        return out
    t_prev = np.ones(D)
    t_cur = x.copy()
    out[:, 0] = t_cur
    for k in range(1, n):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
        out[:, k] = t_cur
    return out


def _np_dual_terms(phi, theta, mu):
    s = phi @ theta
    smax = s.max()
    w = np.exp(s - smax)
    z = w.sum()
    q = w / z
    log_z = smax + np.log(z)
    mean = q @ phi
    grad = mean - mu
    centred = phi - mean
    hess = centred.T @ (q[:, None] * centred)
    return log_z, q, grad, hess


def _np_characteristic(weights, x, times):
    phase = np.outer(times, x)
    return np.cos(phase) @ weights, np.sin(phase) @ weights


numpy_kernels = SimpleNamespace(
    name="numpy",
    hamiltonian=_np_hamiltonian,
    chebyshev_matrix=_np_chebyshev_matrix,
    dual_terms=_np_dual_terms,
    characteristic=_np_characteristic,
)


# --------------------------------------------------------------------------
# numba versions
# --------------------------------------------------------------------------

def _nb_hamiltonian(L, g, h, J, boundary_z):
    D = 1 << L
    H = np.zeros((D, D))
    for s in range(D):
        diag = 0.0
        prev = 0.0
        for i in range(L):
            sz = 1.0 - 2.0 * ((s >> (L - 1 - i)) & 1)
            diag += h * sz
            if i > 0:
                diag += J * prev * sz
            prev = sz
            H[s, s ^ (1 << (L - 1 - i))] += g
        if boundary_z:
            first = 1.0 - 2.0 * ((s >> (L - 1)) & 1)
            last = 1.0 - 2.0 * (s & 1)
            diag -= J * (first + last)
        H[s, s] = diag
    return H


def _nb_chebyshev_matrix(x, n):
    D = x.shape[0]
    out = np.empty((D, n))
    for j in range(D):
        if n == 0:
            break
        t_prev = 1.0
        t_cur = x[j]
        out[j, 0] = t_cur
        for k in range(1, n):
            t_next = 2.0 * x[j] * t_cur - t_prev
            t_prev = t_cur
            t_cur = t_next
            out[j, k] = t_cur
    return out


def _nb_dual_terms(phi, theta, mu):
    D, n = phi.shape
    s = np.empty(D)
    smax = -np.inf
    for j in range(D):
        acc = 0.0
        for k in range(n):
            acc += phi[j, k] * theta[k]
        s[j] = acc
        if acc > smax:
            smax = acc
    z = 0.0
    for j in range(D):
        s[j] = np.exp(s[j] - smax)
        z += s[j]
    q = s / z
    log_z = smax + np.log(z)
    mean = np.zeros(n)
    for j in range(D):
        for k in range(n):
            mean[k] += q[j] * phi[j, k]
    hess = np.zeros((n, n))
    c = np.empty(n)
    for j in range(D):
        for k in range(n):
            c[k] = phi[j, k] - mean[k]
        for a in range(n):
            qa = q[j] * c[a]
            for b in range(a + 1):
                hess[a, b] += qa * c[b]
    for a in range(n):
        for b in range(a):
            hess[b, a] = hess[a, b]
    return log_z, q, mean - mu, hess


def _nb_characteristic(weights, x, times):
    nt = times.shape[0]
    re = np.zeros(nt)
    im = np.zeros(nt)
    for i in range(nt):
        t = times[i]
        a = 0.0
        b = 0.0
        for j in range(x.shape[0]):
            a += weights[j] * np.cos(x[j] * t)
            b += weights[j] * np.sin(x[j] * t)
        re[i] = a
        im[i] = b
    return re, im


if numba is not None:
    _jit = numba.njit(cache=True)
    numba_kernels = SimpleNamespace(
        name="numba",
        hamiltonian=_jit(_nb_hamiltonian),
        chebyshev_matrix=_jit(_nb_chebyshev_matrix),
        dual_terms=_jit(_nb_dual_terms),
        characteristic=_jit(_nb_characteristic),
    )
else:  # pragma: no cover
    numba_kernels = None

active = numpy_kernels if (_DISABLED or numba_kernels is None) else numba_kernels


def backend():
    return active.name
