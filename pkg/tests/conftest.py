import numpy as np
import pytest

from uinfc.clf import BoxSet, abs_clf
from uinfc.validate import endi_clf

X0 = np.array([-1.0, 0.5, 0.2, 0.1, 0.1])


@pytest.fixture(scope="session")
def endi():
    return endi_clf()


@pytest.fixture(scope="session")
def absv():
    return abs_clf()


@pytest.fixture
def box2():
    return BoxSet([-3.0, -3.0], [3.0, 3.0])


@pytest.fixture
def box1():
    return BoxSet([-1.0], [1.0])
