import math
from pathlib import Path

import pytest

from app.spidercert.bench import gen_complete
from app.spidercert.graph import build_graph

DATA = Path(__file__).resolve().parent.parent / "data"


def _paley_signed(q: int):
    residues = {x * x % q for x in range(1, q)}
    edges = [(u, v, 1, 1 if (v - u) % q in residues else -1) for u in range(q) for v in range(u + 1, q)]
    return build_graph(edges, n=q)


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def edge():
    return build_graph([(0, 1, 1, -1)])


@pytest.fixture
def triangle():
    return build_graph([(0, 1, 1, -1), (1, 2, 1, -1), (0, 2, 1, -1)])


@pytest.fixture
def path4():
    return build_graph([(0, 1, 1, -1), (1, 2, 1, -1), (2, 3, 1, -1)])


@pytest.fixture
def cycle5():
    return build_graph([(i, (i + 1) % 5, 1, -1) for i in range(5)])


@pytest.fixture
def signed_c4():
    return build_graph([(0, 1, 1, 1), (1, 2, 1, -1), (2, 3, 1, 1), (0, 3, 1, -1)])


@pytest.fixture
def k5():
    return gen_complete(5)


@pytest.fixture(scope="session")
def k256():
    return gen_complete(256)


@pytest.fixture(scope="session")
def paley61():
    """Signed complete graph on Z_61 with quadratic-residue signs; rho = sqrt(61) / 60."""
    return _paley_signed(61)


PALEY_RHO = math.sqrt(61) / 60
