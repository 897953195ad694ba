import numpy as np
import pytest

from fcarray import ArrayLayout, DipoleModel


@pytest.fixture
def layout():
    return ArrayLayout(M=4, N=2)


@pytest.fixture
def model(layout):
    return DipoleModel.for_layout(layout)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
