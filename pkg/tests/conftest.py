import numpy as np
import pytest

from thzdoa.array_model import ArrayConfig, SectorPlan
from thzdoa.scene import Scene, make_plan, random_betas, random_coupling, synth_snapshots

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def desk_cfg():
    return ArrayConfig(64, 8, 300e9, 30e9, 16)


@pytest.fixture(scope="session")
def split_cfg():
    return ArrayConfig(128, 8, 300e9, 30e9, 11)


@pytest.fixture(scope="session")
def small_cfg():
    return ArrayConfig(16, 4, 300e9, 30e9, 4)


def make_scene(cfg, angles_deg, rng, n_sectors=6, coupled=True):
    sectors = SectorPlan.uniform(n_sectors)
    if coupled:
        coupling = random_coupling(n_sectors, cfg.n_subcarriers, rng)
    else:
        from thzdoa.array_model import CouplingModel

        coupling = CouplingModel.identity(n_sectors, cfg.n_subcarriers, 5)
    angles = np.deg2rad(np.sort(np.asarray(angles_deg, dtype=float)))
    return Scene(angles, random_betas(angles.size, rng), coupling, sectors)


def make_snapshots(cfg, angles_deg, seed, snr_db=None, coupled=True, n_snapshots=100):
    rng = np.random.default_rng(seed)
    scene = make_scene(cfg, angles_deg, rng, coupled=coupled)
    plan = make_plan(cfg, n_snapshots, snr_db, rng)
    return synth_snapshots(cfg, scene, plan, rng)


@pytest.fixture(scope="session")
def noiseless_pair(desk_cfg):
    """Two coupled targets, noiseless, desk scale."""
    return make_snapshots(desk_cfg, [-23.0, 41.5], seed=101)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
