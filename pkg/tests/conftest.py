import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from triplex.bundle import AttentionMatrix, TokenSpan
from triplex.fixtures import write_fixture_tree
from triplex.search import ArgumentPair


@pytest.fixture(scope="session")
def fixture_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixtures")
    write_fixture_tree(root)
    return root


def random_stochastic_matrix(rng: np.random.Generator, size: int) -> AttentionMatrix:
    weights = rng.random((size, size))
    weights = weights / weights.sum(axis=1, keepdims=True)
    return AttentionMatrix(weights.astype(np.float32))


def random_disjoint_pair(rng: np.random.Generator, size: int,
                         max_span: int = 2) -> ArgumentPair:
    while True:
        a = int(rng.integers(0, size))
        b = int(rng.integers(0, size))
        la = int(rng.integers(1, max_span + 1))
        lb = int(rng.integers(1, max_span + 1))
        if a + la <= size and b + lb <= size:
            s, e = TokenSpan(a, a + la), TokenSpan(b, b + lb)
            if not s.overlaps(e):
                return ArgumentPair(s_span=s, e_span=e)
