import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chansep.channel import SystemConfig, realize
from chansep.separation import separate

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_pd(rng, K, floor=0.1):
    X = crandn(rng, K, K)
    return X @ X.conj().T + floor * np.eye(K)


def small_config(N_y=2, N_z=4, K=2, **kw):
    return SystemConfig(M_y=4, M_z=2, N_y=N_y, N_z=N_z, K=K, **kw)


def separated(cfg, seed, key=()):
    real = realize(cfg, seed=seed, key=key)
    return real, separate(real, cfg.sigma2, force=not real.pure_los)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
