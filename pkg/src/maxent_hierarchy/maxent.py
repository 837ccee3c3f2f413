"""Moment-constrained maximum entropy on a discrete spectrum.

The n-th level ensemble is q_j ~ exp(sum_k theta_k phi_k(e_j)), with theta
chosen so that the first n basis moments of q match the targets. theta is
found by minimising the convex dual

    F(theta) = log sum_j exp(sum_k theta_k phi_k(e_j)) - theta . mu

with damped Newton steps. The gradient of F is the moment residual and its
Hessian is the covariance matrix of the basis functions under q.
"""

import decimal
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import Basis, MomentVector, Rescale, convert_coefficients, convert_moments, design_matrix, design_matrix_extended
from .errors import BasisMismatchError, ConvergenceError, InfeasibleError

logger = logging.getLogger(__name__)

LOSSLESS_MULTIPLIER_ORDER = 30
ENTROPY_BOUND = 1e-11
DECIMAL_DIGITS = 40
DECIMAL_STEPS = 8


@dataclass
class SolverOptions:
    grad_tol: float = 1e-10
    max_newton_iters: int = 200
    damping_growth: float = 10.0
    armijo: float = 1e-4
    basis: Basis = Basis.CHEBYSHEV_RESCALED
    theta_bound: float = 1e8
    # final Newton steps in extended precision; the best iterate is kept
    refine_steps: int = 3
    # bound on |S(gamma) - S(p) - D_KL(p || gamma)| required for success
    entropy_tol: float = 1e-10

    def __post_init__(self):
        self.basis = Basis(self.basis)
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be at least 1")
        if not self.damping_growth > 1:
            raise ValueError("damping_growth must exceed 1")
        if not self.entropy_tol > 0:
            raise ValueError("entropy_tol must be positive")

    def to_dict(self):
        return {
            "grad_tol": self.grad_tol,
            "max_newton_iters": self.max_newton_iters,
            "damping_growth": self.damping_growth,
            "armijo": self.armijo,
            "basis": self.basis.value,
            "theta_bound": self.theta_bound,
            "refine_steps": self.refine_steps,
            "entropy_tol": self.entropy_tol,
        }


@dataclass
class MaxEntEnsemble:
    level: int
    theta: np.ndarray
    probabilities: np.ndarray
    log_partition: float
    working_basis: Basis
    constraint_residuals: np.ndarray
    rescale: Rescale
    energies: np.ndarray = field(repr=False)
    log_q: np.ndarray = field(default=None, repr=False)
    iterations: int = 0
    damping_events: int = 0
    converged: bool = True

    @property
    def grad_norm(self):
        r = self.constraint_residuals
        return float(np.max(np.abs(r))) if r.size else 0.0

    @property
    def entropy_bound(self):
        """sum |theta_k r_k|, a bound on |S(gamma) - S(p) - D_KL(p || gamma)|."""
        return float(np.abs(self.theta) @ np.abs(self.constraint_residuals)) if self.level else 0.0

    def log_probabilities(self):
        """log q_j from the exponent, finite even where q_j underflows."""
        if self.log_q is not None:
            return self.log_q
        phi = design_matrix(self.energies, self.level, self.working_basis, self.rescale)
        return phi @ self.theta - self.log_partition


def _prepare_targets(targets, n, basis, rescale):
    if len(targets) < n:
        raise ValueError(f"need {n} target moments, got {len(targets)}")
    targets = targets.truncate(n)
    if targets.basis is Basis.MONOMIAL_RAW:
        targets = MomentVector(targets.values, targets.basis, rescale)
    elif not (
        math.isclose(targets.rescale.a, rescale.a, rel_tol=1e-12)
        and math.isclose(targets.rescale.b, rescale.b, rel_tol=1e-12, abs_tol=1e-15)
    ):
        raise BasisMismatchError(
            f"targets were rescaled with {targets.rescale}, the spectrum needs {rescale}"
        )
    else:
        targets = MomentVector(targets.values, targets.basis, rescale)
    if targets.basis is not basis:
        targets = convert_moments(targets, basis)
    return targets.values


def _newton_direction(hess, grad, lam, seed, growth=10.0):
    """Solve (hess + lam I) d = -grad, growing lam until the factorisation works."""
    n = len(grad)
    eye = np.eye(n)
    bumps = 0
    while True:
        try:
            chol = np.linalg.cholesky(hess + lam * eye)
        except np.linalg.LinAlgError:
            lam = max(lam * growth, seed)
            bumps += 1
            if lam > 1e12 * max(seed, 1.0):
                raise
            continue
        y = np.linalg.solve(chol, -grad)
        d = np.linalg.solve(chol.T, y)
        if np.all(np.isfinite(d)):
            return d, lam, bumps
        lam = max(lam * growth, seed)
        bumps += 1


def solve_maxent(energies, targets, n, opts=None, theta0=None, callback=None):
    """Maximum-entropy distribution on ``energies`` matching ``n`` moments.

    ``targets`` is a MomentVector with at least ``n`` entries; it is converted
    to ``opts.basis`` if needed. ``theta0`` warm-starts the iteration and is
    zero-padded or truncated to length ``n``. ``callback(it, theta, grad,
    hess)`` is invoked at every iterate.
    """
    opts = opts or SolverOptions()
    energies = np.ascontiguousarray(energies, dtype=float)
    D = len(energies)
    rescale = Rescale.from_energies(energies)
    if n < 0 or n > D - 1:
        raise ValueError(f"level must lie in [0, {D - 1}], got {n}")
    if n == 0:
        return MaxEntEnsemble(
            level=0,
            theta=np.zeros(0),
            probabilities=np.full(D, 1.0 / D),
            log_partition=math.log(D),
            working_basis=opts.basis,
            constraint_residuals=np.zeros(0),
            rescale=rescale,
            energies=energies,
        )

    # targets may carry extended precision; the double loop only needs doubles
    mu_full = _prepare_targets(targets, n, opts.basis, rescale)
    mu = np.asarray(mu_full, dtype=float)
    phi = np.ascontiguousarray(design_matrix(energies, n, opts.basis, rescale))
    theta = np.zeros(n)
    if theta0 is not None:
        m = min(n, len(theta0))
        theta[:m] = theta0[:m]

    dual = _kernels.active.dual_terms
    log_z, q, grad, hess = dual(phi, theta, mu)
    f = log_z - theta @ mu
    lam = 0.0
    damping_events = 0
    it = 0

    while True:
        gnorm = float(np.max(np.abs(grad)))
        if callback is not None:
            callback(it, theta, grad, hess)
        if gnorm <= opts.grad_tol or it >= opts.max_newton_iters:
            break
        it += 1

        seed = 1e-12 * max(float(np.trace(hess)) / n, 1e-300)
        accepted = False
        for _ in range(8):
            try:
                d, lam_used, bumps = _newton_direction(hess, grad, lam, seed, opts.damping_growth)
            except np.linalg.LinAlgError:
                break
            damping_events += bumps
            slope = float(grad @ d)
            step = 1.0
            while step > 1e-12:
                theta_new = theta + step * d
                ln, qn, gn, hn = dual(phi, theta_new, mu)
                fn = ln - theta_new @ mu
                sufficient = fn <= f + opts.armijo * step * slope
                # at the rounding floor F cannot decrease measurably; accept if the residual does
                noise = 64 * np.finfo(float).eps * (abs(ln) + np.abs(theta_new) @ np.abs(mu) + 1.0)
                floor = fn <= f + noise and np.max(np.abs(gn)) < gnorm
                if sufficient or floor:
                    accepted = True
                    break
                step *= 0.5
            if accepted:
                # relax the ridge after a clean step, grow it after a failed one
                lam = lam_used / opts.damping_growth if step == 1.0 else lam_used
                if lam < seed:
                    lam = 0.0
                break
            lam = max(lam_used * opts.damping_growth, seed)
            damping_events += 1
        if not accepted:
            break

        theta, log_z, q, grad, hess, f = theta_new, ln, qn, gn, hn, fn
        if not np.all(np.isfinite(theta)) or np.max(np.abs(theta)) > opts.theta_bound:
            raise InfeasibleError(
                f"dual diverged at level {n} (|theta| = {np.max(np.abs(theta)):.3g}); "
                "targets are not moments of a distribution on this spectrum"
            )

    theta, log_z, log_q, q, grad, refined = _refine(
        energies, n, opts.basis, rescale, theta, mu_full, opts.refine_steps
    )
    # S(gamma_n) - S(p) - D_KL(p || gamma_n) = -theta . residual, so the entropy
    # bookkeeping is only as good as this bound. Near-singular levels can
    # leave it large even in extended precision; retry those in decimal.
    if opts.refine_steps and float(np.abs(theta) @ np.abs(grad)) > ENTROPY_BOUND and np.max(np.abs(grad)) < 1e-6:
        out = _refine_decimal(energies, n, opts.basis, rescale, theta, mu_full, DECIMAL_STEPS)
        if out is not None and np.max(np.abs(out[4])) < np.max(np.abs(grad)):
            theta, log_z, log_q, q, grad = out[:5]
            refined += out[5]
    ens = MaxEntEnsemble(
        level=n,
        theta=theta,
        probabilities=q,
        log_partition=log_z,
        working_basis=opts.basis,
        constraint_residuals=grad,
        rescale=rescale,
        energies=energies,
        log_q=log_q,
        iterations=it + refined,
        damping_events=damping_events,
    )
    ens.converged = ens.grad_norm <= opts.grad_tol and ens.entropy_bound <= opts.entropy_tol
    if ens.grad_norm > opts.grad_tol:
        raise ConvergenceError(
            f"level {n}: Newton stopped after {ens.iterations} iterations with residual "
            f"{ens.grad_norm:.3g} (tolerance {opts.grad_tol:.3g})",
            grad_norm=ens.grad_norm,
            ensemble=ens,
        )
    if not ens.converged:
        raise ConvergenceError(
            f"level {n}: residual {ens.grad_norm:.3g} meets tolerance but |theta| is {np.max(np.abs(theta)):.3g}, "
            f"so entropies are only good to {ens.entropy_bound:.3g} (tolerance {opts.entropy_tol:.3g})",
            grad_norm=ens.grad_norm,
            ensemble=ens,
        )
    logger.debug("level %d converged in %d iterations (residual %.3g)", n, ens.iterations, ens.grad_norm)
    return ens


def _solve_triangular(a, b, lower):
    n = len(b)
    x = np.zeros(n)
    order = range(n) if lower else range(n - 1, -1, -1)
    for i in order:
        x[i] = (b[i] - a[i] @ x) / a[i, i]
    return x


def _refine(energies, n, basis, rescale, theta, mu, steps):
    """Newton steps with the exponent and moments carried in extended precision.

    For large multipliers the double-precision residual stalls near
    |theta| * eps, which is too coarse for entropy identities that scale with
    theta . residual. A few full Newton steps fix that; the iterate with the
    smallest residual is returned.
    """
    phi = design_matrix_extended(energies, n, basis, rescale)
    mu_ld = np.asarray(mu, dtype=np.longdouble)

    def terms(th):
        s = phi @ th
        smax = s.max()
        w = np.exp(s - smax)
        z = w.sum()
        q = w / z
        mean = q @ phi
        return smax + np.log(z), s - smax - np.log(z), q, mean - mu_ld, mean

    th = np.asarray(theta, dtype=np.longdouble)
    state = terms(th)
    gnorm = np.max(np.abs(state[3]))
    best = (gnorm, th, state, 0)
    for step in range(1, steps + 1):
        if gnorm == 0:
            break
        q, g, mean = state[2], state[3], state[4]
        # hess = R^T R from a QR of the weighted design, which keeps the
        # conditioning of the design rather than squaring it
        weighted = np.asarray(np.sqrt(q)[:, None] * (phi - mean), dtype=float)
        r = np.linalg.qr(weighted, mode="r")
        if not np.all(np.abs(np.diag(r)) > 0):
            break
        y = _solve_triangular(r.T, -np.asarray(g, dtype=float), lower=True)
        d = _solve_triangular(r, y, lower=False)
        if not np.all(np.isfinite(d)):
            break
        th = th + d
        state = terms(th)
        gnorm = np.max(np.abs(state[3]))
        # the max-norm residual is not monotone along Newton steps
        if gnorm < best[0]:
            best = (gnorm, th, state, step)
    _, th, (log_z, log_q, q, g, _), taken = best
    return (
        np.asarray(th, dtype=float),
        float(log_z),
        np.asarray(log_q, dtype=float),
        np.asarray(q, dtype=float),
        np.asarray(g, dtype=float),
        taken,
    )


def _to_decimal(x):
    num, den = x.as_integer_ratio()
    return decimal.Decimal(num) / decimal.Decimal(den)


def _decimal_cholesky(hess, n):
    """Lower factor of hess + ridge, growing the ridge from 1e-30 * trace."""
    D = decimal.Decimal
    scale = sum(hess[k][k] for k in range(n)) / n
    ridge = D(0)
    for _ in range(12):
        chol = [[D(0)] * n for _ in range(n)]
        ok = True
        for k in range(n):
            for m in range(k + 1):
                acc = hess[k][m] + (ridge if k == m else 0) - sum(chol[k][i] * chol[m][i] for i in range(m))
                if k == m:
                    if acc <= 0:
                        ok = False
                        break
                    chol[k][k] = acc.sqrt()
                else:
                    chol[k][m] = acc / chol[m][m]
            if not ok:
                break
        if ok:
            return chol
        ridge = scale * D("1e-30") if ridge == 0 else ridge * 10
    return None


def _refine_decimal(energies, n, basis, rescale, theta, mu, steps):
    """Newton steps in 40-digit decimal arithmetic.

    Only used for levels whose Hessian is too ill-conditioned for the
    extended-precision pass (condition numbers near 1e19). Returns None if the
    Cholesky factorisation breaks down.
    """
    D = decimal.Decimal
    with decimal.localcontext() as ctx:
        ctx.prec = DECIMAL_DIGITS
        x = rescale.apply(energies) if basis is not Basis.MONOMIAL_RAW else np.asarray(energies, dtype=float)
        phi = []
        for xj in x:
            xj = D(float(xj))
            row, prev, cur = [], D(1), xj
            for _ in range(n):
                row.append(cur)
                if basis is Basis.CHEBYSHEV_RESCALED:
                    prev, cur = cur, 2 * xj * cur - prev
                else:
                    cur = cur * xj
            phi.append(row)
        mu_d = [_to_decimal(v) for v in np.asarray(mu)]
        th = [D(float(t)) for t in theta]

        def terms(th):
            s = [sum(r[k] * th[k] for k in range(n)) for r in phi]
            smax = max(s)
            w = [(v - smax).exp() for v in s]
            z = sum(w)
            log_z = smax + z.ln()
            q = [v / z for v in w]
            mean = [sum(q[j] * phi[j][k] for j in range(len(q))) for k in range(n)]
            return log_z, [v - log_z for v in s], q, [mean[k] - mu_d[k] for k in range(n)], mean

        state = terms(th)
        best = (max(abs(v) for v in state[3]), th, state, 0)
        for step in range(1, steps + 1):
            _, _, q, g, mean = state
            c = [[r[k] - mean[k] for k in range(n)] for r in phi]
            hess = [[sum(q[j] * c[j][k] * c[j][m] for j in range(len(q))) for m in range(k + 1)] for k in range(n)]
            chol = _decimal_cholesky(hess, n)
            if chol is None:
                return None
            y = [D(0)] * n
            for k in range(n):
                y[k] = (-g[k] - sum(chol[k][i] * y[i] for i in range(k))) / chol[k][k]
            d = [D(0)] * n
            for k in range(n - 1, -1, -1):
                d[k] = (y[k] - sum(chol[i][k] * d[i] for i in range(k + 1, n))) / chol[k][k]
            th = [th[k] + d[k] for k in range(n)]
            state = terms(th)
            gnorm = max(abs(v) for v in state[3])
            if gnorm < best[0]:
                best = (gnorm, th, state, step)
            if gnorm == 0:
                break
        _, th, (log_z, log_q, q, g, _), taken = best
        return (
            np.array([float(v) for v in th]),
            float(log_z),
            np.array([float(v) for v in log_q]),
            np.array([float(v) for v in q]),
            np.array([float(v) for v in g]),
            taken,
        )


def _gibbs_weights(x, beta):
    s = -beta * x
    w = np.exp(s - s.max())
    z = w.sum()
    return w / z, float(s.max() + math.log(z))


def gibbs_crosscheck(energies, target_mean):
    """Canonical ensemble with <H> = target_mean, found by bisection on beta.

    Independent of the Newton solver; the result must coincide with
    ``solve_maxent(..., n=1)``. The inverse temperature in raw energy units is
    ``-theta[0] * rescale.a`` (see :func:`inverse_temperature`).
    """
    energies = np.ascontiguousarray(energies, dtype=float)
    rescale = Rescale.from_energies(energies)
    if not (rescale.e_min < target_mean < rescale.e_max):
        raise InfeasibleError(
            f"mean energy {target_mean!r} lies outside ({rescale.e_min!r}, {rescale.e_max!r})"
        )
    x = rescale.apply(energies)
    target = float(rescale.apply([target_mean])[0])

    def mean(beta):
        return float(_gibbs_weights(x, beta)[0] @ x)

    lo, hi = -1.0, 1.0
    while mean(lo) < target:
        lo *= 2.0
    while mean(hi) > target:
        hi *= 2.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if mean(mid) > target:
            lo = mid
        else:
            hi = mid
    beta = lo if abs(mean(lo) - target) <= abs(mean(hi) - target) else hi
    q, log_z = _gibbs_weights(x, beta)
    return MaxEntEnsemble(
        level=1,
        theta=np.array([-beta]),
        probabilities=q,
        log_partition=log_z,
        working_basis=Basis.MONOMIAL_RESCALED,
        constraint_residuals=np.array([q @ x - target]),
        rescale=rescale,
        energies=energies,
    )


def _raw_coefficients(ens):
    if ens.level > LOSSLESS_MULTIPLIER_ORDER:
        warnings.warn(
            f"back-transforming {ens.level} multipliers to raw monomials is lossy beyond order "
            f"{LOSSLESS_MULTIPLIER_ORDER}",
            stacklevel=3,
        )
    return convert_coefficients(
        ens.theta, ens.working_basis, Basis.MONOMIAL_RAW, ens.rescale, with_constant=True
    )


def multipliers_monomial(ens):
    """Multipliers lambda_k = 1 + (coefficient of H^k in log q), k = 1..n."""
    if ens.level == 0:
        return np.zeros(0)
    return _raw_coefficients(ens)[1:] + 1.0


def normalization_multiplier(ens):
    """lambda_0 = 1 - log Z_n with Z_n = Tr exp(sum_k (lambda_k - 1) H^k)."""
    if ens.level == 0:
        return 1.0 - ens.log_partition
    const = _raw_coefficients(ens)[0]
    return 1.0 - (ens.log_partition - const)


def inverse_temperature(ens):
    if ens.level != 1:
        raise ValueError("inverse temperature is defined for the level-1 ensemble only")
    return 1.0 - multipliers_monomial(ens)[0]


def consistency_report(ens, de, k_max):
    """(k, model moment, true moment) for k = 1..k_max in rescaled monomials."""
    if k_max <= ens.level:
        raise ValueError(f"k_max must exceed the ensemble level {ens.level}")
    phi = design_matrix(de.energies, k_max, Basis.MONOMIAL_RESCALED, ens.rescale)
    model = ens.probabilities @ phi
    true = de.probabilities @ phi
    return [(k + 1, float(model[k]), float(true[k])) for k in range(k_max)]
