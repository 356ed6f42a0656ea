from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import settings

from tgmp.design import DesignSet, build_design
from tgmp.seeds import component_rng
from tgmp.signals import OfdmConfig, ReferencePa, ofdm_generate, reference_pa_apply

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

TRAIN = (100, 1024)
TEST = (20, 30649)
VALIDATION = (31000, 20000)


@dataclass
class Planted:
    x: np.ndarray
    y: np.ndarray
    design: DesignSet

    @property
    def y_test(self) -> np.ndarray:
        return self.y[TEST[0]:TEST[0] + TEST[1]]


@pytest.fixture(scope="session")
def planted() -> Planted:
    """Default OFDM drive through the built-in PA at 50 dB SNR, root seed 0."""
    x = ofdm_generate(OfdmConfig(), rng=component_rng(0, "ofdm"))
    y = reference_pa_apply(x, ReferencePa(), rng=component_rng(0, "noise"))
    return Planted(x, y, build_design(x, y, *TRAIN, 11, 10, 8))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm((a - b).ravel()) / max(np.linalg.norm(np.ravel(b)), 1e-300))


# acceptance criteria register here; the summary prints one line per criterion
ACCEPTANCE: dict[int, tuple[str, bool, float, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, elapsed, detail = ACCEPTANCE[num]
        line = f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title} ({elapsed:.2f} s)"
        terminalreporter.write_line(line + (f": {detail}" if detail else ""))
