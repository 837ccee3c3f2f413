import numpy as np
import pytest

from maxent_hierarchy import (
    ExperimentConfig,
    SpinChainParams,
    build_hamiltonian,
    diagonal_ensemble,
    diagonalize,
    moments_spectral,
    neel_state,
    run_hierarchy,
)

PAPER = dict(g=0.9, h=0.75, J=1.0)


def chain_setup(L, axis="z", **couplings):
    params = SpinChainParams(L, **{**PAPER, **couplings})
    H = build_hamiltonian(params)
    spec = diagonalize(H)
    psi0 = neel_state(L, axis)
    de = diagonal_ensemble(spec, psi0)
    return H, spec, psi0, de


@pytest.fixture(scope="session")
def l4():
    return chain_setup(4)


@pytest.fixture(scope="session")
def l4_targets(l4):
    return moments_spectral(l4[3], 15)


@pytest.fixture(scope="session")
def l4_report():
    cfg = ExperimentConfig(SpinChainParams(4, **PAPER), "neel_z", n_max=15, snapshot_levels=[0, 1, 2, 15])
    return run_hierarchy(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def golden():
    import json
    import os

    with open(os.path.join(os.path.dirname(__file__), "data", "golden_L4_neel_z.json")) as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in mod.RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
