"""Small tensor factories shared by the test modules."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from loomc.models.tensor import TensorValue

REPO_ROOT = Path(__file__).resolve().parents[1]


def random_f32(rng: np.random.Generator, *dims: int, low: float = -4.0, high: float = 4.0) -> TensorValue:
    return TensorValue.from_array(rng.uniform(low, high, dims).astype(np.float32))


def small_ints_f32(rng: np.random.Generator, *dims: int) -> TensorValue:
    """Integer-valued f32 data; sums of these stay exact under reassociation."""

    return TensorValue.from_array(rng.integers(-8, 9, dims).astype(np.float32))
