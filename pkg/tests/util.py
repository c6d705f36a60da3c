"""Shared helpers for the test suite: seeded random field data."""

from __future__ import annotations

import numpy as np

from localfield.field import FieldConfig, FieldElement

CONFIGS = [FieldConfig("padic", 2), FieldConfig("padic", 3), FieldConfig("laurent", 2), FieldConfig("laurent", 3)]


def random_element(rng: np.random.Generator, config: FieldConfig,
                   min_level: int = -4, max_level: int = 4, max_len: int = 6,
                   allow_zero: bool = True) -> FieldElement:
    if allow_zero and rng.random() < 0.1:
        return FieldElement.zero(config)
    level = int(rng.integers(min_level, max_level + 1))
    length = int(rng.integers(1, max_len + 1))
    digits = [int(rng.integers(0, config.p)) for _ in range(length)]
    digits[0] = int(rng.integers(1, config.p))
    return FieldElement.make(config, level, digits)
