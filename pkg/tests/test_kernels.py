import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import crandn, rel_err
from tgmp import _kernels as k

needs_numba = pytest.mark.skipif(not k.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def sig():
    return 0.3 * crandn(np.random.default_rng(0), 600)


def _cases(x):
    rng = np.random.default_rng(1)
    m1, m2, p = 6, 5, 4
    return [
        ("gmp", k.gmp_simulate_numba, k.gmp_simulate_numpy, (x, crandn(rng, m1, m2, p), 8, 500)),
        ("cp", k.cp_simulate_numba, k.cp_simulate_numpy,
         (x, crandn(rng, m1, 3), crandn(rng, m2, 3), crandn(rng, p, 3), 8, 500)),
        ("tt", k.tt_simulate_numba, k.tt_simulate_numpy,
         (x, crandn(rng, m1, 2), crandn(rng, 2, m2, 3), crandn(rng, 3, p), 8, 500)),
        ("tucker", k.tucker_simulate_numba, k.tucker_simulate_numpy,
         (x, crandn(rng, 2, 3, 2), crandn(rng, m1, 2), crandn(rng, m2, 3), crandn(rng, p, 2), 8, 500)),
    ]


@needs_numba
def test_design_backends_identical(sig):
    h1, m1 = k.design_numba(sig, 10, 500, 7, 11, 6)
    h2, m2 = k.design_numpy(sig, 10, 500, 7, 11, 6)
    assert np.array_equal(h1, h2)
    # complex abs may round differently in the last ulp between the two
    assert np.max(np.abs(m1 - m2) / m2) <= 1e-14


@needs_numba
@pytest.mark.parametrize("idx", range(4))
def test_simulate_backends_agree(sig, idx):
    name, fast, ref, args = _cases(sig)[idx]
    assert rel_err(fast(*args), ref(*args)) <= 1e-13, name


def test_backend_flag_selects_numpy():
    code = "import tgmp._kernels as k; print(k.backend(), k.USE_NUMBA)"
    env = dict(os.environ, TGMP_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "False"]
    env.pop("TGMP_DISABLE_NUMBA")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split()[0] == ("numba" if k.HAVE_NUMBA else "numpy")
