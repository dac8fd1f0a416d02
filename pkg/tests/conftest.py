import json
from pathlib import Path

import numpy as np
import pytest

from ctab.table import ContingencyTable

DATA = Path(__file__).parent / "data"

# 3-variable, 3-category marginals used throughout the simulation checks
ONE_WAY_333 = [(0.1, 0.3, 0.6), (0.2, 0.4, 0.4), (0.3, 0.3, 0.4)]
ONE_WAY_222 = [(0.2, 0.8), (0.4, 0.6), (0.5, 0.5)]


def load(name) -> ContingencyTable:
    return ContingencyTable.from_json(json.loads((DATA / name).read_text()))


@pytest.fixture(scope="session")
def berkeley():
    return load("berkeley.json")


@pytest.fixture(scope="session")
def mood():
    return load("mood.json")


@pytest.fixture(scope="session")
def fr444():
    return load("fienberg_rinaldo.json")


def random_table(rng, dims, zeros=False):
    p = rng.dirichlet(np.ones(int(np.prod(dims)))).reshape(dims)
    if zeros:
        p[rng.random(p.shape) < 0.2] = 0.0
        if p.sum() == 0:
            p.flat[0] = 1.0
        p /= p.sum()
    return p
