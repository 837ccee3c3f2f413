"""End-to-end sweep: model -> spectrum -> diagonal ensemble -> gamma_0..gamma_nmax."""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import Rescale
from .ensembles import diagonal_ensemble, moments_spectral, neel_state
from .errors import ConvergenceError, NumericalError
from .maxent import SolverOptions, solve_maxent
from .metrics import ConvergenceRecord, characteristic_function, convergence_record, fidelity_series, shannon_entropy
from .spin_chain import SpinChainParams, build_hamiltonian, diagonalize

logger = logging.getLogger(__name__)

DEFAULT_NMAX_CAP = 30


@dataclass
class ExperimentConfig:
    chain: SpinChainParams
    initial_state: str = "neel_z"
    n_max: int = None
    snapshot_levels: tuple = ()
    solver: SolverOptions = field(default_factory=SolverOptions)
    time_grid: np.ndarray = None
    seed: int = 0  # unused: the pipeline is deterministic

    def __post_init__(self):
        D = self.chain.dimension
        if self.initial_state not in ("neel_z", "neel_x"):
            raise ValueError(f"initial_state must be 'neel_z' or 'neel_x', got {self.initial_state!r}")
        if self.n_max is None:
            self.n_max = min(D - 1, DEFAULT_NMAX_CAP)
        if not 0 <= self.n_max <= D - 1:
            raise ValueError(f"n_max must lie in [0, {D - 1}] for L={self.chain.L}, got {self.n_max}")
        self.snapshot_levels = tuple(sorted(set(int(k) for k in self.snapshot_levels)))
        bad = [k for k in self.snapshot_levels if not 0 <= k <= self.n_max]
        if bad:
            raise ValueError(f"snapshot levels {bad} outside [0, {self.n_max}]")
        if self.time_grid is not None:
            self.time_grid = np.asarray(self.time_grid, dtype=float)
            if not np.all(np.isfinite(self.time_grid)):
                raise ValueError("time grid must be finite")


@dataclass
class LevelTelemetry:
    level: int
    converged: bool
    iterations: int
    damping_events: int
    residual: float
    error: str = None
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class Snapshot:
    """Aligned (rescaled energy, p_DE, q_gamma) arrays for one level."""

    level: int
    energies: np.ndarray
    p_de: np.ndarray
    q_gamma: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, Snapshot)
            and self.level == other.level
            and all(np.array_equal(a, b) for a, b in zip(self._arrays(), other._arrays()))
        )

    def _arrays(self):
        return self.energies, self.p_de, self.q_gamma


@dataclass
class FidelityTable:
    times: np.ndarray
    f_de: np.ndarray
    f_gamma: dict

    def __eq__(self, other):
        return (
            isinstance(other, FidelityTable)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.f_de, other.f_de)
            and self.f_gamma.keys() == other.f_gamma.keys()
            and all(np.array_equal(self.f_gamma[k], other.f_gamma[k]) for k in self.f_gamma)
        )


@dataclass
class HierarchyReport:
    config: ExperimentConfig
    dimension: int
    rescale: Rescale
    entropy_de: float
    records: list
    telemetry: list
    snapshots: dict
    fidelity: FidelityTable = None

    def __eq__(self, other):
        if not isinstance(other, HierarchyReport):
            return NotImplemented
        same_records = len(self.records) == len(other.records) and all(
            _record_equal(a, b) for a, b in zip(self.records, other.records)
        )
        return (
            self.dimension == other.dimension
            and self.rescale == other.rescale
            and _float_equal(self.entropy_de, other.entropy_de)
            and same_records
            and self.telemetry == other.telemetry
            and self.snapshots == other.snapshots
            and self.fidelity == other.fidelity
        )

    def record(self, level):
        return self.records[level]

    @property
    def dkl(self):
        return np.array([r.relative_entropy for r in self.records])


def _float_equal(a, b):
    return a == b or (math.isnan(a) and math.isnan(b))


def _record_equal(a, b):
    return a.level == b.level and all(
        _float_equal(getattr(a, f), getattr(b, f))
        for f in ("entropy", "relative_entropy", "trace_distance", "pinsker_bound")
    )


def _failed_record(level):
    nan = math.nan
    return ConvergenceRecord(level, nan, nan, nan, nan)


def run_hierarchy(cfg):
    """Solve levels 0..n_max in order, warm-starting each from the previous one.

    A level that does not converge is recorded (with its last iterate) and the
    sweep continues from the last converged multipliers.
    """
    H = build_hamiltonian(cfg.chain)
    spec = diagonalize(H)
    psi0 = neel_state(cfg.chain.L, cfg.initial_state[-1])
    de = diagonal_ensemble(spec, psi0)
    rescale = de.rescale
    p = de.probabilities
    targets = moments_spectral(de, max(cfg.n_max, 1), cfg.solver.basis, rescale)

    records, telemetry, ensembles = [], [], {}
    theta = None
    for n in range(cfg.n_max + 1):
        t0 = time.perf_counter()
        error = None
        try:
            ens = solve_maxent(de.energies, targets, n, cfg.solver, theta0=theta)
            theta = ens.theta
        except ConvergenceError as exc:
            ens, error = exc.ensemble, str(exc)
        except NumericalError as exc:
            ens, error = None, str(exc)
        elapsed = time.perf_counter() - t0
        if error:
            logger.warning("%s", error)
        if ens is None:
            records.append(_failed_record(n))
            telemetry.append(LevelTelemetry(n, False, 0, 0, math.nan, error, elapsed))
            continue
        records.append(convergence_record(p, ens))
        telemetry.append(
            LevelTelemetry(n, ens.converged, ens.iterations, ens.damping_events, ens.grad_norm, error, elapsed)
        )
        if n in cfg.snapshot_levels:
            ensembles[n] = ens
        logger.info("level %d: d = %.6g (%d iterations)", n, records[-1].relative_entropy, ens.iterations)

    x = rescale.apply(de.energies)
    snapshots = {}
    for n in cfg.snapshot_levels:
        q = ensembles[n].probabilities if n in ensembles else np.full(len(p), math.nan)
        snapshots[n] = Snapshot(n, x.copy(), p.copy(), q.copy())

    fidelity = None
    if cfg.time_grid is not None:
        times = cfg.time_grid
        fidelity = FidelityTable(
            times=times.copy(),
            f_de=fidelity_series(de, times),
            f_gamma={n: np.abs(characteristic_function(snapshots[n].q_gamma, x, times)) for n in snapshots},
        )

    return HierarchyReport(
        config=cfg,
        dimension=spec.dimension,
        rescale=rescale,
        entropy_de=shannon_entropy(p),
        records=records,
        telemetry=telemetry,
        snapshots=snapshots,
        fidelity=fidelity,
    )


def snapshot_distribution(report, level):
    """(rescaled energies, p_DE, q_gamma) for a level listed in ``snapshot_levels``."""
    try:
        snap = report.snapshots[level]
    except KeyError:
        raise KeyError(
            f"level {level} was not snapshotted (available: {sorted(report.snapshots)})"
        ) from None
    return snap.energies, snap.p_de, snap.q_gamma
