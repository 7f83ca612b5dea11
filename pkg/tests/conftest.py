import os
from pathlib import Path

import numpy as np
import pytest

import bctseg as b


def data_path(name: str) -> Path | None:
    """Optional real-data file for the full-scale experiments.

    Looked up under $BCTSEG_DATA_DIR (default tests/data/). Tests using
    these skip when the file is absent.
    """
    root = Path(os.environ.get("BCTSEG_DATA_DIR", Path(__file__).parent / "data"))
    p = root / name
    return p if p.exists() else None


def require_data(name: str) -> Path:
    p = data_path(name)
    if p is None:
        pytest.skip(f"data file {name} not available (set BCTSEG_DATA_DIR)")
    return p


@pytest.fixture
def binary_alphabet():
    return b.Alphabet.of_size(2)


@pytest.fixture
def ternary_alphabet():
    return b.Alphabet.of_size(3)


@pytest.fixture
def switch_sequence(binary_alphabet):
    """n=20 binary series with a regime switch near the middle (D=1)."""
    raw = np.array([0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1])
    return b.split_context(raw, 1, binary_alphabet)
