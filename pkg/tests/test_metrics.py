import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from conftest import chain_setup
from maxent_hierarchy import fidelity_series, mgf_compare, moments_spectral, relative_entropy, shannon_entropy, solve_maxent, trace_distance_commuting, trace_distance_pure_states
from maxent_hierarchy.ensembles import DiagonalEnsemble
from maxent_hierarchy.metrics import SupportWarning, characteristic_function, convergence_record, pinsker_bound


def _de(E, p):
    p = np.asarray(p, dtype=float)
    return DiagonalEnsemble(p, np.asarray(E, dtype=float), p > 0)


def test_entropy_uniform_and_point():
    assert abs(shannon_entropy(np.full(16, 1 / 16)) - math.log(16)) < 1e-15
    assert shannon_entropy(np.eye(5)[2]) == 0.0


def test_entropy_rejects_negative():
    with pytest.raises(ValueError):
        shannon_entropy([1.1, -0.1])
    shannon_entropy([1.0 + 1e-13, -1e-13])  # within slack


def test_entropy_neel_z_against_mpmath(l4):
    p = l4[3].probabilities
    assert abs(shannon_entropy(p) - oracles.entropy_mp(p)) < 1e-14


def test_relative_entropy_identity_cases(rng):
    p = rng.dirichlet(np.ones(12))
    assert relative_entropy(p, p) == 0.0
    u = np.full(12, 1 / 12)
    assert abs(relative_entropy(p, u) - (math.log(12) - shannon_entropy(p))) < 1e-14


def test_relative_entropy_support_violation():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        d = relative_entropy([0.5, 0.5, 0.0], [1.0, 0.0, 0.0])
    assert d == math.inf
    assert caught[0].category is SupportWarning and caught[0].message.index == 1


def test_relative_entropy_uses_log_q():
    # q underflows to zero but its logarithm is known
    log_q = np.array([-800.0, 0.0])
    q = np.exp(log_q)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = relative_entropy([1e-10, 1 - 1e-10], q, log_q=log_q)
    assert math.isfinite(d) and d > 0


def test_relative_entropy_shape_mismatch():
    with pytest.raises(ValueError):
        relative_entropy([1.0], [0.5, 0.5])


def test_trace_distance_cases():
    assert trace_distance_commuting([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert trace_distance_commuting([1, 0, 0], [0, 0, 1]) == 1.0


@pytest.mark.parametrize("L", [2, 3])
def test_commuting_trace_distance_matches_full_matrix(L):
    _, spec, _, de = chain_setup(L)
    V = spec.eigenvectors
    for n in range(0, 2**L):
        ens = solve_maxent(de.energies, moments_spectral(de, max(n, 1)), n)
        rho = V @ np.diag(de.probabilities) @ V.T
        sigma = V @ np.diag(ens.probabilities) @ V.T
        full = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - sigma)))
        assert abs(full - trace_distance_commuting(de.probabilities, ens.probabilities)) < 1e-12


def test_pinsker_over_l4_hierarchy(l4, l4_targets):
    p = l4[3].probabilities
    for n in range(16):
        rec = convergence_record(p, solve_maxent(l4[3].energies, l4_targets, n))
        assert 0 <= rec.trace_distance <= min(1.0, rec.pinsker_bound + 1e-12)
        assert rec.relative_entropy >= 0


def test_fidelity_examples():
    t = np.linspace(0, 10, 41)
    assert fidelity_series(_de([-1.0, 1.0], [0.5, 0.5]), [0.0])[0] == 1.0
    np.testing.assert_allclose(fidelity_series(_de([-2.0, 0.5, 3.0], [0, 1, 0]), t), 1.0, atol=1e-15)
    two = _de([-1.0, 1.0], [0.5, 0.5])
    np.testing.assert_allclose(fidelity_series(two, t, units="raw"), np.abs(np.cos(t)), atol=1e-15)
    # the spectrum already spans [-1, 1], so rescaled units coincide
    np.testing.assert_allclose(fidelity_series(two, t), np.abs(np.cos(t)), atol=1e-15)
    with pytest.raises(ValueError):
        fidelity_series(two, t, units="fs")


def test_fidelity_is_survival_probability(rng):
    H, spec, psi0, de = chain_setup(4, "x")
    V, E = spec.eigenvectors, spec.eigenvalues
    for t in rng.uniform(0, 5, size=4):
        psi_t = V @ (np.exp(-1j * E * t) * (V.T @ psi0.amplitudes))
        direct = abs(np.vdot(psi0.amplitudes, psi_t))
        assert abs(fidelity_series(de, [t], units="raw")[0] - direct) < 1e-12


def test_characteristic_function_conjugate():
    x = np.array([-0.3, 0.1, 0.9])
    w = np.array([0.2, 0.5, 0.3])
    a = characteristic_function(w, x, [0.7])
    b = characteristic_function(w, x, [-0.7])
    assert abs(a[0] - np.conj(b[0])) < 1e-15


def test_pure_state_trace_distance():
    assert trace_distance_pure_states(1.0) == 0.0
    assert trace_distance_pure_states(0.0) == 1.0
    t = np.linspace(0, 3, 13)
    np.testing.assert_allclose(trace_distance_pure_states(np.abs(np.cos(t))), np.abs(np.sin(t)), atol=1e-7)
    with pytest.raises(ValueError):
        trace_distance_pure_states(1.1)


def test_mgf_gap_zero_at_origin(l4, l4_targets):
    ens = solve_maxent(l4[3].energies, l4_targets, 2)
    assert mgf_compare(ens, l4[3], [0.0])[0] < 1e-15


def test_mgf_full_hierarchy_l2():
    de = chain_setup(2)[3]
    ens = solve_maxent(de.energies, moments_spectral(de, 3), 3)
    assert np.max(mgf_compare(ens, de, np.linspace(0, 10, 201))) <= 1e-8


def _slope(ens, de):
    t = np.logspace(-3, -1, 21)
    gap = mgf_compare(ens, de, t)
    return np.polyfit(np.log(t), np.log(gap), 1)[0]


@pytest.mark.parametrize("n", [1, 2, 3])
def test_mgf_short_time_order(l4, l4_targets, n):
    ens = solve_maxent(l4[3].energies, l4_targets, n)
    assert abs(_slope(ens, l4[3]) - (n + 1)) <= 0.3


def test_mgf_matches_direct_difference(l4, l4_targets):
    # at larger t both routes are well above rounding and must agree
    de = l4[3]
    ens = solve_maxent(de.energies, l4_targets, 2)
    t = np.linspace(0.5, 5, 10)
    x = de.rescale.apply(de.energies)
    direct = np.abs(characteristic_function(ens.probabilities, x, t) - characteristic_function(de.probabilities, x, t))
    np.testing.assert_allclose(mgf_compare(ens, de, t), direct, atol=1e-13)


prob = arrays(np.float64, st.integers(2, 20), elements=st.floats(1e-6, 1.0)).map(lambda a: a / a.sum())


@settings(max_examples=200, deadline=None)
@given(prob, st.data())
def test_property_divergence_bounds(p, data):
    q = data.draw(arrays(np.float64, len(p), elements=st.floats(1e-6, 1.0)).map(lambda a: a / a.sum()))
    d = relative_entropy(p, q)
    t = trace_distance_commuting(p, q)
    assert d >= 0
    assert 0 <= t <= 1 + 1e-15
    assert t <= pinsker_bound(d) + 1e-12
    assert abs(d - oracles.kl_mp(p, q)) <= 1e-12 * max(1.0, d)


@settings(max_examples=200, deadline=None)
@given(prob)
def test_property_entropy_range(p):
    s = shannon_entropy(p)
    assert -1e-15 <= s <= math.log(len(p)) + 1e-12


def test_relative_entropy_resolves_tiny_divergences(rng):
    import mpmath

    p = rng.dirichlet(np.ones(16))
    r = rng.normal(size=16) * 1e-10
    r -= r.mean()
    q = p + r
    with mpmath.workdps(60):
        pm = [mpmath.mpf(x) for x in p]
        qm = [mpmath.mpf(x) for x in q]
        # the float sums of p and q differ from 1 by rounding, which would swamp
        # a 1e-18 divergence; the generalised form is insensitive to that
        exact = float(sum(a * mpmath.log(a / b) - a + b for a, b in zip(pm, qm)))
    d = relative_entropy(p, q)
    assert abs(d - exact) <= 1e-6 * exact
    assert trace_distance_commuting(p, q) <= pinsker_bound(d)
