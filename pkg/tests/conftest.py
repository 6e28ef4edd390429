import numpy as np
import pytest

from secure_irs.channel import (
    BeamformingSet,
    SystemConfig,
    generate_channels,
    random_grid_phase,
    sample_pse,
)


def make_instance(seed, M=4, K=2, N=8, b=3, pse=False, **kw):
    """Channels, a grid phase and random power-feasible beams."""
    rng = np.random.default_rng(seed)
    cfg = SystemConfig(M=M, K=K, N=N, b=b, seed=seed, **kw)
    ch = generate_channels(cfg, rng)
    phase = random_grid_phase(N, b, rng)
    if pse and phase.b is not None:
        phase.pse = sample_pse(phase.b, N, rng)
    w = rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
    w *= np.sqrt(cfg.P_T / np.sum(np.abs(w) ** 2))
    return cfg, ch, phase, BeamformingSet(w), rng


def random_beams(rng, K, M, P_T, count):
    """Beams uniform in direction with total power uniform in [0, P_T]."""
    W = rng.standard_normal((count, K, M)) + 1j * rng.standard_normal((count, K, M))
    W /= np.sqrt(np.sum(np.abs(W) ** 2, axis=(1, 2), keepdims=True))
    return W * np.sqrt(P_T * rng.uniform(size=(count, 1, 1)))


@pytest.fixture
def instance():
    return make_instance(0)
