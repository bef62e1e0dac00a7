import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from otasync.config import NodeState, OfdmConfig, Scene, Target

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIG3_NODES = ((35.35, -35.35), (-35.35, -35.35))


@pytest.fixture
def cfg():
    return OfdmConfig()


def pair_scene(dt=0.0, df=0.0, snr_db=None, noise_var=0.0, seed=0, targets=None, eta=1.0):
    """Two nodes at the standard geometry; node 1 carries the offsets."""
    nodes = (NodeState(FIG3_NODES[0]), NodeState(FIG3_NODES[1], dt, df))
    targets = (Target((0.0, 0.0)),) if targets is None else targets
    return Scene(nodes, targets, eta=eta, noise_var=noise_var, seed=seed, snr_db=snr_db)


def tone_freq(x):
    """Dominant frequency (cycles/sample) of a noiseless sum of tones by phase regression."""
    ph = np.unwrap(np.angle(x))
    return np.polyfit(np.arange(len(x)), ph, 1)[0] / (2 * np.pi)
