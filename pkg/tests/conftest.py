"""Shared fixtures: small, fast configurations reused across test modules."""

import numpy as np
import pytest

from fiberfrp.cli import ExperimentConfig
from fiberfrp.signal import DualPolSymbolSeq, LinkPower, PulseShape, make_constellation
from fiberfrp.ssfm import FiberParams


@pytest.fixture(scope="session")
def table_fiber():
    """Standard single-span fiber (desk defaults)."""
    return FiberParams.from_engineering(
        alpha_db_km=0.2, beta2_ps2_km=-21.7, gamma_w_km=1.2, length_km=120.0
    )


@pytest.fixture(scope="session")
def pulse60():
    """60 GBd RRC, roll-off 0.01, default span and oversampling."""
    return PulseShape(rolloff=0.01, symbol_period=1.0 / 60e9)


@pytest.fixture(scope="session")
def qam16():
    return make_constellation("16QAM")


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture()
def small_config(tmp_path):
    """Fast end-to-end config: short sequence, coarse steps."""
    return ExperimentConfig(
        n_sym=256,
        step_m=1000.0,
        powers_dbm=(0.0,),
        memories=(0, 1),
        batch_size=128,
        out_dir=str(tmp_path / "results"),
    )


def random_seq(constellation, n, rng):
    pts = constellation.points
    return DualPolSymbolSeq(
        x=pts[rng.integers(pts.size, size=n)],
        y=pts[rng.integers(pts.size, size=n)],
    )


@pytest.fixture()
def link7():
    return LinkPower(power_dbm=7.0, symbol_rate=60e9)
