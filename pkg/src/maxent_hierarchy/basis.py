"""Polynomial bases over the spectrum and exact conversions between them.

Energies are mapped affinely onto [-1, 1] once per spectrum. Every basis is
described by a lower-triangular matrix expressing its functions phi_0..phi_n
as polynomials in the rescaled energy; conversions of moments and of
multipliers go through those matrices in exact rational arithmetic and are
rounded to double only at the end. Without that, the large Chebyshev
coefficients (about 3e11 at degree 30) would wipe out ~11 digits.
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from . import _kernels
from .errors import BasisMismatchError, MultiplierOverflowError


class Basis(str, Enum):
    MONOMIAL_RAW = "monomial_raw"
    MONOMIAL_RESCALED = "monomial_rescaled"
    CHEBYSHEV_RESCALED = "chebyshev_rescaled"


@dataclass(frozen=True)
class Rescale:
    """Affine map ``e = a * E + b`` sending [E_min, E_max] onto [-1, 1]."""

    a: float
    b: float
    e_min: float
    e_max: float

    @classmethod
    def from_energies(cls, energies):
        e_min = float(np.min(energies))
        e_max = float(np.max(energies))
        width = e_max - e_min
        if not width > 0:
            raise ValueError("cannot rescale a spectrum of zero width")
        return cls(a=2.0 / width, b=-(e_max + e_min) / width, e_min=e_min, e_max=e_max)

    def apply(self, energies):
        energies = np.asarray(energies, dtype=float)
        x = (2.0 * energies - self.e_max - self.e_min) / (self.e_max - self.e_min)
        return np.clip(x, -1.0, 1.0)

    def to_dict(self):
        return {"a": self.a, "b": self.b, "e_min": self.e_min, "e_max": self.e_max}


@dataclass
class MomentVector:
    """Moments mu_1..mu_n of a distribution in a given basis (mu_0 = 1 implied)."""

    values: np.ndarray
    basis: Basis
    rescale: Rescale

    def __post_init__(self):
        values = np.asarray(self.values)
        # extended-precision moments are kept as they are
        self.values = values if values.dtype == np.longdouble else values.astype(float)
        self.basis = Basis(self.basis)

    def __len__(self):
        return len(self.values)

    def truncate(self, n):
        return MomentVector(self.values[:n].copy(), self.basis, self.rescale)

    def to_basis(self, basis):
        return convert_moments(self, basis)


def design_matrix(energies, n, basis, rescale):
    """D x n matrix with columns phi_1(E_j) .. phi_n(E_j)."""
    basis = Basis(basis)
    energies = np.ascontiguousarray(energies, dtype=float)
    if basis is Basis.MONOMIAL_RAW:
        x = energies
    else:
        x = np.ascontiguousarray(rescale.apply(energies))
    if basis is Basis.CHEBYSHEV_RESCALED:
        return _kernels.active.chebyshev_matrix(x, int(n))
    return np.cumprod(np.repeat(x[:, None], n, axis=1), axis=1) if n else np.empty((len(x), 0))


def design_matrix_extended(energies, n, basis, rescale):
    """design_matrix in np.longdouble (80-bit on x86_64, plain double elsewhere)."""
    basis = Basis(basis)
    x = np.asarray(energies if basis is Basis.MONOMIAL_RAW else rescale.apply(energies), dtype=np.longdouble)
    out = np.empty((len(x), n), dtype=np.longdouble)
    if basis is Basis.CHEBYSHEV_RESCALED:
        t_prev, t_cur = np.ones_like(x), x.copy()
        for k in range(n):
            out[:, k] = t_cur
            t_prev, t_cur = t_cur, 2 * x * t_cur - t_prev
    else:
        acc = np.ones_like(x)
        for k in range(n):
            acc = acc * x
            out[:, k] = acc
    return out


# --------------------------------------------------------------------------
# exact coefficient matrices (rows: basis functions, cols: powers of e)
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def chebyshev_coefficients(n):
    """Integer matrix C with T_k(x) = sum_j C[k][j] x**j, k, j = 0..n."""
    rows = [[1] + [0] * n]
    if n >= 1:
        rows.append([0, 1] + [0] * (n - 1))
    for k in range(2, n + 1):
        rows.append([2 * (rows[k - 1][j - 1] if j else 0) - rows[k - 2][j] for j in range(n + 1)])
    return tuple(tuple(r) for r in rows)


def _invert_lower(m):
    n = len(m)
    inv = [[Fraction(0)] * n for _ in range(n)]
    for col in range(n):
        for i in range(col, n):
            acc = Fraction(int(i == col))
            for k in range(col, i):
                acc -= m[i][k] * inv[k][col]
            inv[i][col] = acc / m[i][i]
    return tuple(tuple(r) for r in inv)


@lru_cache(maxsize=None)
def monomial_in_chebyshev(n):
    """Rational matrix A with x**k = sum_j A[k][j] T_j(x)."""
    return _invert_lower([[Fraction(c) for c in row] for row in chebyshev_coefficients(n)])


def _affine_powers(a, b, n):
    # row k holds the coefficients of (a x + b)**k
    a, b = Fraction(a), Fraction(b)
    return tuple(
        tuple(comb(k, j) * a**j * b ** (k - j) if j <= k else Fraction(0) for j in range(n + 1))
        for k in range(n + 1)
    )


def basis_matrix(basis, n, rescale=None):
    """Exact (n+1)x(n+1) matrix of phi_0..phi_n as polynomials in the rescaled energy."""
    basis = Basis(basis)
    if basis is Basis.CHEBYSHEV_RESCALED:
        return tuple(tuple(Fraction(c) for c in row) for row in chebyshev_coefficients(n))
    if basis is Basis.MONOMIAL_RESCALED:
        return tuple(tuple(Fraction(int(i == j)) for j in range(n + 1)) for i in range(n + 1))
    if rescale is None:
        raise BasisMismatchError("raw monomial basis needs the rescale map")
    # E = (e - b) / a
    a, b = Fraction(rescale.a), Fraction(rescale.b)
    return _affine_powers(1 / a, -b / a, n)


def _inverse_basis_matrix(basis, n, rescale=None):
    basis = Basis(basis)
    if basis is Basis.CHEBYSHEV_RESCALED:
        return monomial_in_chebyshev(n)
    if basis is Basis.MONOMIAL_RESCALED:
        return basis_matrix(basis, n)
    return _affine_powers(rescale.a, rescale.b, n)


def _matvec(m, v):
    return [sum((m[i][j] * v[j] for j in range(len(v)) if m[i][j]), Fraction(0)) for i in range(len(m))]


def _rmatvec(m, v):
    return [sum((m[i][j] * v[i] for i in range(len(v)) if m[i][j]), Fraction(0)) for j in range(len(m[0]))]


def _to_float(values, what):
    try:
        return np.array([float(v) for v in values])
    except OverflowError:
        raise MultiplierOverflowError(
            f"{what} overflow double precision; report them in the working basis instead"
        ) from None


def convert_moments(mv, basis):
    """Re-express moments in another basis (exact transform, single final rounding)."""
    basis = Basis(basis)
    if basis is mv.basis:
        return MomentVector(mv.values.copy(), basis, mv.rescale)
    n = len(mv.values)
    vec = [Fraction(1)] + [Fraction(float(v)) for v in mv.values]
    # rescaled-monomial moments first, then into the target basis
    if mv.basis is Basis.MONOMIAL_RESCALED:
        mono = vec
    else:
        mono = _matvec(_inverse_basis_matrix(mv.basis, n, mv.rescale), vec)
    out = mono if basis is Basis.MONOMIAL_RESCALED else _matvec(basis_matrix(basis, n, mv.rescale), mono)
    return MomentVector(_to_float(out[1:], "moments"), basis, mv.rescale)


def convert_coefficients(theta, src, dst, rescale=None, with_constant=False):
    """Re-express exponent coefficients so that sum_k theta_k phi_k is unchanged.

    ``theta`` holds coefficients of phi_1..phi_n. The constant term picked up
    by the change of basis is returned first when ``with_constant`` is set,
    since it only shifts the normalisation.
    """
    src, dst = Basis(src), Basis(dst)
    n = len(theta)
    vec = [Fraction(0)] + [Fraction(float(t)) for t in theta]
    if src is not dst:
        # coefficients of powers of the rescaled energy
        mono = _rmatvec(basis_matrix(src, n, rescale), vec)
        vec = _rmatvec(_inverse_basis_matrix(dst, n, rescale), mono)
    out = _to_float(vec, "multipliers")
    return out if with_constant else out[1:]
