"""Root-seed splitting: every random component draws from its own stream."""

from __future__ import annotations

import zlib

import numpy as np

COMPONENTS = ("ofdm", "noise", "init", "sketch", "power")


def component_seed(root: int, name: str) -> np.random.SeedSequence:
    if name not in COMPONENTS:
        raise ValueError(f"unknown random component {name!r}; expected one of {COMPONENTS}")
    return np.random.SeedSequence(int(root), spawn_key=(zlib.crc32(name.encode()),))


def component_rng(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(component_seed(root, name))


def component_int(root: int, name: str) -> int:
    """A plain integer seed for APIs that take one (e.g. the sketch seed)."""
    return int(component_seed(root, name).generate_state(1, dtype=np.uint32)[0])
