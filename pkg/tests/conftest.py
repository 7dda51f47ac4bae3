"""Shared fixtures: demo data frame and small synthetic training matrices."""

from __future__ import annotations

import numpy as np
import pytest

from spreadnet.demo import synthetic_series
from spreadnet.preprocess import TrainingMatrix
from spreadnet.series import align, parse_month


@pytest.fixture(scope="session")
def demo_frame():
    """Aligned four-variable demo frame (190 months, seeded)."""
    return align(list(synthetic_series().values()))


def make_matrix(
    n_rows: int = 60,
    n_inputs: int = 3,
    seed: int = 0,
    target=None,
    noise: float = 0.0,
    base_set_id: int = 1,
    lag: int = 1,
) -> TrainingMatrix:
    """Small synthetic training matrix; default target is a linear map."""
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(-1.0, 3.0, size=(n_rows, n_inputs))
    if target is None:
        # keep the default target strictly positive so it can be scored as levels
        coef = np.arange(1, n_inputs + 1, dtype=float)
        output = inputs @ coef + 50.0
    else:
        output = target(inputs)
    if noise:
        output = output + noise * rng.standard_normal(n_rows)
    months = np.arange(parse_month("2000-01"), parse_month("2000-01") + n_rows)
    return TrainingMatrix(
        base_set_id=base_set_id,
        lag=lag,
        input_names=tuple(f"x{i}" for i in range(n_inputs)),
        inputs=inputs,
        output=output,
        months_out=months,
    )
