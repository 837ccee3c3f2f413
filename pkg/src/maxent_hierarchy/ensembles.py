"""Initial states, the diagonal ensemble, and energy moments."""

import math
from dataclasses import dataclass

import numpy as np

from .basis import Basis, MomentVector, Rescale, design_matrix, design_matrix_extended
from .errors import MomentOverflowError

SUPPORT_CUTOFF = 1e-14

__all__ = [
    "InitialState",
    "DiagonalEnsemble",
    "MomentVector",
    "neel_state",
    "custom_state",
    "diagonal_ensemble",
    "moments_spectral",
    "moments_operator",
]


@dataclass
class InitialState:
    kind: str
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.kind not in ("neel_z", "neel_x", "custom"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"initial state is not normalised (norm**2 = {norm!r})")


@dataclass
class DiagonalEnsemble:
    probabilities: np.ndarray
    energies: np.ndarray
    support_mask: np.ndarray

    @property
    def dimension(self):
        return len(self.probabilities)

    @property
    def rescale(self):
        return Rescale.from_energies(self.energies)


def neel_state(L, axis="z"):
    """Antiferromagnetic product state |up, down, up, ...> along ``axis``."""
    if L < 2:
        raise ValueError("L must be at least 2")
    if axis == "z":
        # site 1 is the most significant bit; odd sites up (bit 0), even sites down
        index = sum(1 << (L - 1 - i) for i in range(1, L, 2))
        amps = np.zeros(1 << L, dtype=complex)
        amps[index] = 1.0
        return InitialState("neel_z", amps)
    if axis == "x":
        plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
        minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
        amps = np.ones(1)
        for i in range(L):
            amps = np.kron(amps, plus if i % 2 == 0 else minus)
        return InitialState("neel_x", amps.astype(complex))
    raise ValueError(f"axis must be 'z' or 'x', got {axis!r}")


def custom_state(amplitudes, normalize=True):
    amps = np.asarray(amplitudes, dtype=complex)
    if normalize:
        amps = amps / np.linalg.norm(amps)
    return InitialState("custom", amps)


def diagonal_ensemble(spec, psi0):
    """Energy distribution p_j = |<E_j|psi0>|**2 of the time-averaged state."""
    amps = psi0.amplitudes
    if amps.shape[0] != spec.eigenvectors.shape[0]:
        raise ValueError(
            f"state has dimension {amps.shape[0]}, spectrum has {spec.eigenvectors.shape[0]}"
        )
    overlaps = spec.eigenvectors.T @ amps
    p = overlaps.real**2 + overlaps.imag**2
    total = p.sum()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"diagonal ensemble normalisation off by {total - 1.0:.3g}")
    p = p / total
    return DiagonalEnsemble(
        probabilities=p,
        energies=np.asarray(spec.eigenvalues, dtype=float).copy(),
        support_mask=p > SUPPORT_CUTOFF,
    )


def moments_spectral(de, n_max, basis=Basis.CHEBYSHEV_RESCALED, rescale=None):
    """mu_k = sum_j p_j phi_k(E_j) for k = 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    basis = Basis(basis)
    rescale = rescale or de.rescale
    if basis is Basis.MONOMIAL_RAW:
        emax = float(np.max(np.abs(de.energies)))
        if emax > 1 and n_max * math.log(emax) > math.log(np.finfo(float).max) - 1:
            raise MomentOverflowError(
                f"raw moments up to order {n_max} overflow double range (|E| up to {emax:.3g}); "
                "use a rescaled basis",
                k=n_max,
            )
    if basis is Basis.MONOMIAL_RAW:
        phi = design_matrix(de.energies, n_max, basis, rescale)
        return MomentVector(de.probabilities @ phi, basis, rescale)
    # Rescaled moments are summed in extended precision: with multipliers of
    # order 1e7 at high levels, double-rounded targets alone would shift the
    # entropy of the fitted ensemble by ~1e-9.
    phi = design_matrix_extended(de.energies, n_max, basis, rescale)
    return MomentVector(de.probabilities.astype(np.longdouble) @ phi, basis, rescale)


def moments_operator(H, psi0, n_max, rescale=None):
    """mu_k = <psi0|H^k|psi0> by repeated matrix-vector products (raw monomials).

    Needs no diagonalisation. ``rescale`` is only carried along so the result
    can be converted to other bases; it defaults to a map built from the
    Gershgorin bounds, which callers with a spectrum should override.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    H = np.asarray(H, dtype=float)
    psi = psi0.amplitudes
    if H.shape[0] != psi.shape[0]:
        raise ValueError(f"state has dimension {psi.shape[0]}, operator has {H.shape[0]}")
    values = np.empty(n_max)
    v = psi.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, n_max + 1):
            v = H @ v
            if not np.all(np.isfinite(v)):
                raise MomentOverflowError(f"H^{k}|psi0> overflowed double range", k=k)
            values[k - 1] = np.vdot(psi, v).real
    if rescale is None:
        radius = float(np.max(np.abs(H).sum(axis=1)))
        rescale = Rescale.from_energies([-radius, radius])
    return MomentVector(values, Basis.MONOMIAL_RAW, rescale)
