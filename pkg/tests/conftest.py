import numpy as np
import pytest

from laborsim import default_config, default_policy
from laborsim.oracle import kernel_for


@pytest.fixture(scope="session")
def coarse_cfg():
    return default_config("coarse", seed=1234)


@pytest.fixture(scope="session")
def continuous_cfg():
    return default_config("continuous", seed=1234)


@pytest.fixture(scope="session")
def policy():
    return default_policy()


@pytest.fixture(scope="session")
def kernel(coarse_cfg):
    return kernel_for(coarse_cfg)


@pytest.fixture(scope="session")
def zero_hazard_coarse(coarse_cfg):
    """Coarse config with in-labor hazard and surgical risk forced to zero."""
    import dataclasses

    dyn = dataclasses.replace(
        coarse_cfg.coarse,
        hazard=dataclasses.replace(coarse_cfg.coarse.hazard,
                                   intercept=-np.inf, abnormal_fhr=0.0,
                                   brady_persist=0.0, high_sbp=0.0, per_hour=0.0),
        surgical=dataclasses.replace(coarse_cfg.coarse.surgical,
                                     intercept=-np.inf, high_sbp=0.0),
    )
    return dataclasses.replace(coarse_cfg, coarse=dyn)
