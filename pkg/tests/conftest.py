import numpy as np
import pytest

import excursim as ex


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


@pytest.fixture(scope="session")
def cosine_model():
    return ex.preset_model("table1")


@pytest.fixture(scope="session")
def smooth_model():
    return ex.preset_model("table2")


@pytest.fixture(scope="session")
def trend_model():
    return ex.preset_model("table3")


@pytest.fixture(scope="session")
def rough_model():
    return ex.preset_model("table4")
