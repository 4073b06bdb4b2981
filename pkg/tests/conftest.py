import mpmath
import numpy as np
import pytest

from misalign.models import ChannelParams

mpmath.mp.dps = 40


def mp_q(x) -> float:
    """High-precision Gaussian tail used as an oracle"""
    return float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)


@pytest.fixture
def ref_params() -> ChannelParams:
    # SIR 4 dB, SNR 10 dB
    return ChannelParams(h1=10 ** -0.2, sigma=10 ** -0.5)


@pytest.fixture
def fig_params() -> ChannelParams:
    # h1^2 = 0.3981, sigma^2 = 0.1
    return ChannelParams(h1=float(np.sqrt(0.3981)), sigma=float(np.sqrt(0.1)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
