import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cycauc.data import ClientDataset, Example
from cycauc.rng import RngStream


@pytest.fixture
def stream():
    return RngStream(1234)


def random_examples(gen: np.random.Generator, n_pos: int, n_neg: int, dim: int) -> tuple[list[Example], list[Example]]:
    pos = [Example(gen.normal(size=dim), 1) for _ in range(n_pos)]
    neg = [Example(gen.normal(size=dim), -1) for _ in range(n_neg)]
    return pos, neg


def balanced_federation(
    gen: np.random.Generator, n_clients: int, per_class: int, dim: int
) -> list[ClientDataset]:
    """Every client holds exactly per_class positives and negatives."""
    clients = []
    for cid in range(n_clients):
        pos, neg = random_examples(gen, per_class, per_class, dim)
        clients.append(ClientDataset(cid, pos, neg))
    return clients
