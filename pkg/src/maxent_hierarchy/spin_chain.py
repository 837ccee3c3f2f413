"""Dense spin-chain Hamiltonian and its full eigendecomposition."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EigensolverError

logger = logging.getLogger(__name__)

MAX_SITES = 14
DEGENERACY_RTOL = 1e-10


@dataclass(frozen=True)
class SpinChainParams:
    """Open chain with transverse field g, longitudinal field h, Ising coupling J.

    The boundary term ``-J (s_1 + s_L)`` acts on the Pauli component named by
    ``boundary_axis``; only ``"z"`` is supported.
    """

    L: int
    g: float = 0.9
    h: float = 0.75
    J: float = 1.0
    boundary_axis: str = "z"

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L:
            raise ValueError(f"L must be an integer, got {self.L!r}")
        if self.L < 2:
            raise ValueError(f"L must be at least 2, got {self.L}")
        if self.L > MAX_SITES:
            raise ValueError(
                f"L={self.L} gives dimension 2**{self.L}; dense storage is limited to L <= {MAX_SITES}"
            )
        for name in ("g", "h", "J"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coupling {name} must be finite")
        if self.boundary_axis != "z":
            raise ValueError(f"unsupported boundary_axis {self.boundary_axis!r} (only 'z')")

    @property
    def dimension(self):
        return 1 << self.L


@dataclass
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    min_gap: float
    degenerate: bool = False

    @property
    def dimension(self):
        return len(self.eigenvalues)


def build_hamiltonian(params):
    """Return the D x D real symmetric Hamiltonian in the sigma^z product basis.

    Basis index bit 0 means spin up and site 1 is the most significant bit,
    so for L=2 the order is |uu>, |ud>, |du>, |dd>.
    """
    if params.L > MAX_SITES:
        raise ValueError(f"L={params.L} exceeds the dense limit L <= {MAX_SITES}")
    return _kernels.active.hamiltonian(
        int(params.L), float(params.g), float(params.h), float(params.J), params.boundary_axis == "z"
    )


def diagonalize(H):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    asym = np.max(np.abs(H - H.T)) if H.size else 0.0
    if asym > 1e-12:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    try:
        evals, evecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"dense eigensolver failed: {exc}") from exc

    # fix the sign of each column so repeated runs agree bit for bit
    pivots = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[pivots, np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    evecs = evecs * signs

    gaps = np.diff(evals)
    min_gap = float(gaps.min()) if gaps.size else math.inf
    width = float(evals[-1] - evals[0]) if evals.size else 0.0
    degenerate = bool(gaps.size) and min_gap < DEGENERACY_RTOL * width
    if degenerate:
        logger.warning("spectrum is degenerate to working precision (min gap %.3g)", min_gap)
    return SpectralData(eigenvalues=evals, eigenvectors=evecs, min_gap=min_gap, degenerate=degenerate)
