"""Entropies, divergences and dynamical diagnostics, all in nats.

Every ensemble here commutes with H, so states are represented by their
probability vectors over the energy eigenbasis.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .ensembles import SUPPORT_CUTOFF


class SupportWarning(RuntimeWarning):
    """p puts weight where q has none; the relative entropy is infinite."""

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class ConvergenceRecord:
    level: int
    entropy: float
    relative_entropy: float
    trace_distance: float
    pinsker_bound: float


def _as_prob(q, name="q"):
    q = np.asarray(q, dtype=float)
    if q.size and q.min() < -1e-12:
        raise ValueError(f"{name} has negative entries (min {q.min():.3g})")
    return q


def shannon_entropy(q, log_q=None):
    """-sum q log q, entries at or below the support cutoff contributing zero."""
    q = _as_prob(q)
    mask = q > SUPPORT_CUTOFF
    lq = np.log(q[mask]) if log_q is None else np.asarray(log_q, dtype=float)[mask]
    return float(-np.sum(q[mask] * lq))


def relative_entropy(p, q, log_q=None):
    """D_KL(p || q) = sum p (log p - log q).

    Pass ``log_q`` when q comes from an exponential family whose small entries
    may have underflowed. Returns ``inf`` and emits a SupportWarning carrying
    the offending index if p has weight where q vanishes.
    """
    p = _as_prob(p, "p")
    q = _as_prob(q)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    mask = p > SUPPORT_CUTOFF
    if log_q is None:
        with np.errstate(divide="ignore"):
            log_q = np.log(np.clip(q, 0.0, None))
    else:
        log_q = np.asarray(log_q, dtype=float)
    bad = np.flatnonzero(mask & ~np.isfinite(log_q))
    if bad.size:
        idx = int(bad[0])
        warnings.warn(
            SupportWarning(f"p[{idx}] = {p[idx]:.3g} but q[{idx}] = 0: relative entropy is infinite", idx),
            stacklevel=2,
        )
        return math.inf
    # For normalised p and q, sum p log(p/q) equals the sum of the non-negative
    # terms p (e^delta - 1 - delta), delta = log q - log p, plus the q-mass
    # where p is treated as zero. Unlike the direct sum this stays accurate
    # as q -> p, where the divergence falls far below rounding of log p.
    delta = log_q[mask] - np.log(p[mask])
    total = float(np.sum(p[mask] * _expm1_minus_x(delta)))
    rest = ~mask
    if rest.any():
        total += float(np.sum(np.exp(log_q[rest]) - p[rest]))
    return max(total, 0.0)


def _expm1_minus_x(x):
    """exp(x) - 1 - x without cancellation for small |x|."""
    out = np.expm1(x) - x
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = xs * xs * (0.5 + xs * (1 / 6 + xs * (1 / 24 + xs * (1 / 120 + xs / 720))))
    return out


def trace_distance_commuting(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    return float(0.5 * np.sum(np.abs(p - q)))


def pinsker_bound(d):
    return math.sqrt(max(d, 0.0) / 2.0)


def convergence_record(p, ens):
    """Diagnostics of the level-n ensemble against the diagonal ensemble ``p``."""
    log_q = ens.log_probabilities()
    d = relative_entropy(p, ens.probabilities, log_q=log_q)
    return ConvergenceRecord(
        level=ens.level,
        entropy=shannon_entropy(ens.probabilities, log_q=log_q),
        relative_entropy=d,
        trace_distance=trace_distance_commuting(p, ens.probabilities),
        pinsker_bound=pinsker_bound(d),
    )


def _time_axis(de, units):
    if units == "rescaled":
        return np.ascontiguousarray(de.rescale.apply(de.energies))
    if units == "raw":
        return np.ascontiguousarray(de.energies, dtype=float)
    raise ValueError(f"units must be 'rescaled' or 'raw', got {units!r}")


def characteristic_function(weights, x, times):
    times = np.ascontiguousarray(np.atleast_1d(np.asarray(times, dtype=float)))
    re, im = _kernels.active.characteristic(
        np.ascontiguousarray(weights, dtype=float), np.ascontiguousarray(x, dtype=float), times
    )
    return re + 1j * im


def fidelity_series(de, times, units="rescaled"):
    """F(t) = |sum_j p_j exp(i E_j t)|, the survival amplitude of the initial state."""
    x = _time_axis(de, units)
    return np.abs(characteristic_function(de.probabilities, x, times))


def _taylor_remainder(y, n):
    """exp(iy) - sum_{k<=n} (iy)^k / k!, accurate for small |y|."""
    out = np.empty(y.shape, dtype=complex)
    small = np.abs(y) < 2.0
    ys = y[small]
    term = (1j * ys) ** (n + 1) / math.factorial(n + 1)
    acc = term.copy()
    for k in range(n + 2, n + 62):
        term = term * (1j * ys) / k
        acc += term
    out[small] = acc
    yl = y[~small]
    partial = np.zeros(yl.shape, dtype=complex)
    term = np.ones(yl.shape, dtype=complex)
    for k in range(n + 1):
        partial += term
        term = term * (1j * yl) / (k + 1)
    out[~small] = np.exp(1j * yl) - partial
    return out


def mgf_compare(ens, de, times):
    """|M_n(t) - M_DE(t)| in rescaled-energy time units.

    The first n moments of the two distributions agree, so the difference
    starts at order t^(n+1). It is evaluated as the low-order moment residuals
    plus the Taylor remainder of exp(i e t), which keeps small-t values
    accurate far below the rounding level of either characteristic function.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    x = ens.rescale.apply(de.energies)
    r = ens.probabilities - de.probabilities
    n = ens.level
    powers = np.vander(x, n + 1, increasing=True)
    rho = r @ powers
    low = np.zeros(times.shape, dtype=complex)
    for k in range(n + 1):
        low += (1j * times) ** k / math.factorial(k) * rho[k]
    high = _taylor_remainder(np.outer(times, x), n) @ r
    return np.abs(low + high)


def trace_distance_pure_states(F):
    """T(rho(t), rho(0)) = sqrt(1 - F^2) for pure states."""
    F = np.asarray(F, dtype=float)
    if np.any(F < -1e-12) or np.any(F > 1 + 1e-12):
        raise ValueError("fidelity must lie in [0, 1]")
    out = np.sqrt(1.0 - np.clip(F, 0.0, 1.0) ** 2)
    return float(out) if out.ndim == 0 else out
