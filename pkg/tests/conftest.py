import logging
from unittest.mock import MagicMock

import numpy as np
import pytest

from db.base import Base
from db import solve_layer, surrogate_record  # noqa: F401  Ensure tables are registered
from models.market import ControlBox, MarketParams, Scenario, TrueModel


@pytest.fixture(scope="session", autouse=True)
def setup_sqlalchemy_mappers():
    # Configure SQLAlchemy mappers once for all tests
    Base.registry.configure()


@pytest.fixture
def mock_logger():
    return MagicMock(spec=logging.Logger)


@pytest.fixture
def two_asset_model():
    # Two assets, annual moments prorated over T = 10 periods
    return TrueModel.from_annual((0.09, 0.13), (0.25, 0.4), 0.85, 10)


@pytest.fixture
def market():
    return MarketParams(interest_rate_per_period=0.002, horizon=10)


@pytest.fixture
def box():
    return ControlBox(lower=np.zeros(2), upper=np.ones(2))


@pytest.fixture
def scenario(two_asset_model, market, box):
    return Scenario(model=two_asset_model, market=market, box=box)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
