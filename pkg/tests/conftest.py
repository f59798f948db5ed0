import dataclasses

import pytest

from otasync.config import default_params


@pytest.fixture
def params():
    """Default scenario parameters."""
    return default_params()


@pytest.fixture
def tiny_params():
    """Smallest consistent geometry: K=1, tau_c=4 (i1=2, i2=4)."""
    return default_params(n_ues=1, tau_p=1, tau_u=1, tau_g=0, tau_d=2, tau_c=4,
                          beta_ue=0.01, eta=1.0)


def small_instance(**overrides):
    """Reduced-dimension parameters for brute-force oracles."""
    base = dict(n_antennas=8, n_ues=2, tau_p=2, tau_u=46, tau_d=46, tau_c=100,
                beta_ue=0.01, eta=0.5)
    base.update(overrides)
    return default_params(**base)
