from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from treedefect import EncodedTree, Vocabulary


def random_encoded_tree(rng: np.random.Generator, vocab_size: int,
                        max_nodes: int, min_nodes: int = 1) -> EncodedTree:
    """Random tree whose node count lies in [min_nodes, max_nodes]."""
    budget = [int(rng.integers(min_nodes, max_nodes + 1))]

    def build() -> EncodedTree:
        index = int(rng.integers(0, vocab_size))
        budget[0] -= 1
        children = []
        while budget[0] > 0 and rng.random() < 0.55:
            children.append(build())
        return EncodedTree(index, tuple(children))

    return build()


def small_vocab(size: int = 6) -> Vocabulary:
    tokens = ["<unk>"] + [f"tok{i}" for i in range(1, size)]
    return Vocabulary(tuple(tokens))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
