import numpy as np
import pytest

from perflat import FilteredSpace, binomial_tree, coin2


@pytest.fixture
def space2() -> FilteredSpace:
    return coin2()


@pytest.fixture
def tree2() -> FilteredSpace:
    return binomial_tree(2)


@pytest.fixture
def tree3() -> FilteredSpace:
    return binomial_tree(3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
