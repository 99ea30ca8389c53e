import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from viscosurf import mesh  # noqa: E402


@pytest.fixture(scope="session")
def equator3():
    return mesh.generate("equator", 3)


@pytest.fixture(scope="session")
def equator4():
    return mesh.generate("equator", 4)


@pytest.fixture(scope="session")
def equator5():
    return mesh.generate("equator", 5)


@pytest.fixture(scope="session")
def clifford32():
    return mesh.generate("clifford", 32, 32)


@pytest.fixture(scope="session")
def clifford64():
    return mesh.generate("clifford", 64, 64)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(20240817))
