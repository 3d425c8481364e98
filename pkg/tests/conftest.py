import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from softmode.analysis import analyze_trajectory, summarize
from softmode.dynamics import IntegratorConfig, run_ensemble
from softmode.lattice import LatticeGrid
from softmode.schedule import log_grid, make_schedule
from softmode.scores import PatchPosteriorScore, make_drift, make_patch_dictionary

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ENSEMBLE_SEEDS = 8
ENSEMBLE_L = 80
ENSEMBLE_STEPS = 2000
ENSEMBLE_STRIDE = 10


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def schedule():
    return make_schedule(1.0)


@pytest.fixture(scope="session")
def dictionary():
    return make_patch_dictionary(seed=0, K=2, d=2, variant="ten")


@pytest.fixture(scope="session")
def reference_ensemble(schedule, dictionary):
    """Eight full-size reverse trajectories (seeds 0..7), probed every tenth step with the sampler drift."""
    model = PatchPosteriorScore(dictionary, schedule)
    cfg = IntegratorConfig(log_grid(50.0, 1e-3, ENSEMBLE_STEPS), True, 0, ENSEMBLE_STRIDE)
    records = run_ensemble(model, schedule, cfg, ENSEMBLE_SEEDS, shape=LatticeGrid(ENSEMBLE_L).shape)
    drift = make_drift(model, "sde")
    analyses = [analyze_trajectory(rec, schedule, drift) for rec in records]
    return records, analyses, summarize(analyses)
