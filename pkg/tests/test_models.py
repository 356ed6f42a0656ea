import itertools
import json

import numpy as np
import pytest

from conftest import crandn, rel_err
from tgmp.design import build_design, build_full_design
from tgmp.models import (
    CpModel,
    GmpModel,
    TtModel,
    TuckerModel,
    expand_to_gmp,
    flop_count,
    load_model,
    num_flops,
    num_params,
    param_count,
    predict,
    save_model,
    simulate,
)
from tgmp.solvers import random_init


def random_model(kind, dims, ranks, seed):
    if kind == "gmp":
        return GmpModel(crandn(np.random.default_rng(seed), *dims))
    return random_init(kind, dims, ranks, seed=seed, scale=1.0)


def loop_expand(model):
    m1, m2, p = model.dims
    s = np.zeros((m1, m2, p), dtype=complex)
    for i, j, q in itertools.product(range(m1), range(m2), range(p)):
        if isinstance(model, CpModel):
            s[i, j, q] = sum(model.a[i, r] * model.b[j, r] * model.c[q, r] for r in range(model.ranks[0]))
        elif isinstance(model, TtModel):
            r1, r2 = model.ranks
            s[i, j, q] = sum(model.a[i, a] * model.bcore[a, j, b] * model.c[b, q]
                             for a in range(r1) for b in range(r2))
        else:
            r1, r2, r3 = model.ranks
            s[i, j, q] = sum(model.g[a, b, c] * model.a[i, a] * model.b[j, b] * model.c[q, c]
                             for a in range(r1) for b in range(r2) for c in range(r3))
    return s


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(0)
    x = 0.3 * crandn(rng, 200)
    return x, build_design(x, x, 10, 150, 5, 4, 3)


@pytest.mark.parametrize("kind,ranks", [("cp", (2,)), ("tt", (2, 3)), ("tucker", (2, 1, 3))])
def test_expansion_matches_loops(kind, ranks):
    model = random_model(kind, (4, 3, 2), ranks, 1)
    assert rel_err(expand_to_gmp(model).s, loop_expand(model)) <= 1e-12


@pytest.mark.parametrize("kind,ranks", [("gmp", ()), ("cp", (3,)), ("tt", (2, 2)), ("tucker", (2, 2, 2))])
def test_predict_matches_full_contraction_and_simulation(kind, ranks, small):
    x, d = small
    model = random_model(kind, d.dims, ranks, 2)
    full = build_full_design(x, 10, 150, *d.dims)
    ref = np.einsum("nijp,ijp->n", full, expand_to_gmp(model).s)
    assert rel_err(predict(model, d), ref) <= 1e-12
    assert rel_err(simulate(model, x, 10, 150), ref) <= 1e-12


def test_gmp_simulate_loop_oracle(small):
    x, _ = small
    model = random_model("gmp", (3, 2, 3), (), 3)
    out = simulate(model, x, 5, 20)
    for n in range(20):
        t = 5 + n
        ref = sum(model.s[i, j, p] * x[t - i] * abs(x[t - j]) ** p
                  for i in range(3) for j in range(2) for p in range(3))
        assert abs(out[n] - ref) <= 1e-12 * abs(ref)


def test_tt_rank_one_is_cp_rank_one():
    rng = np.random.default_rng(4)
    a, b, c = crandn(rng, 5, 1), crandn(rng, 4, 1), crandn(rng, 3, 1)
    tt = TtModel(a, b.T.reshape(1, 4, 1), c.T)
    assert rel_err(expand_to_gmp(tt).s, expand_to_gmp(CpModel(a, b, c)).s) <= 1e-14


def test_superdiagonal_tucker_is_cp():
    rng = np.random.default_rng(5)
    a, b, c = crandn(rng, 5, 2), crandn(rng, 4, 2), crandn(rng, 3, 2)
    g = np.zeros((2, 2, 2), dtype=complex)
    g[0, 0, 0] = g[1, 1, 1] = 1
    assert rel_err(expand_to_gmp(TuckerModel(g, a, b, c)).s, expand_to_gmp(CpModel(a, b, c)).s) <= 1e-14


def test_shape_validation():
    with pytest.raises(ValueError):
        CpModel(np.ones((3, 2)), np.ones((3, 3)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        TtModel(np.ones((3, 2)), np.ones((3, 3, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        TuckerModel(np.ones((2, 2, 2)), np.ones((3, 2)), np.ones((3, 3)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        GmpModel(np.ones((2, 2)))


def test_param_counts_table():
    for dims, want in [((11, 10, 8), (880, 87, 78, 66)), ((10, 8, 6), (480, 72, 64, 56))]:
        got = (param_count("gmp", dims), param_count("cp", dims, (3,)),
               param_count("tt", dims, (2, 2)), param_count("tucker", dims, (2, 2, 2)))
        assert got == want


def test_flop_counts_hand_values():
    assert flop_count("gmp", (11, 10, 8)) == 7328
    assert flop_count("cp", (11, 10, 8), (3,)) == 2690
    assert flop_count("tt", (11, 10, 8), (2, 2)) == 3398
    with pytest.raises(ValueError):
        flop_count("cp", (11, 10, 8), (2, 2))
    with pytest.raises(ValueError):
        param_count("mlp", (1, 1, 1))


def test_model_counts_follow_shapes():
    m = random_model("tucker", (6, 5, 4), (2, 3, 1), 0)
    assert num_params(m) == sum(v.size for v in m.arrays().values())
    assert num_flops(m) == flop_count("tucker", (6, 5, 4), (2, 3, 1))
    for kind, ranks in [("cp", (3,)), ("tt", (2, 3))]:
        m = random_model(kind, (6, 5, 4), ranks, 0)
        assert num_params(m) == sum(v.size for v in m.arrays().values())


@pytest.mark.parametrize("kind,ranks", [("gmp", ()), ("cp", (3,)), ("tt", (2, 2)), ("tucker", (2, 2, 2))])
def test_save_load_bit_exact(tmp_path, kind, ranks):
    model = random_model(kind, (5, 4, 3), ranks, 7)
    files = save_model(tmp_path / "m.json", model)
    assert files[0] == tmp_path / "m.json" and all(f.exists() for f in files)
    back = load_model(tmp_path / "m.json")
    assert type(back) is type(model)
    for name, arr in model.arrays().items():
        assert back.arrays()[name].tobytes() == arr.tobytes()
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["kind"] == kind and doc["dims"] == [5, 4, 3]


def test_load_rejects_bad_documents(tmp_path):
    save_model(tmp_path / "m.json", random_model("cp", (5, 4, 3), (2,), 0))
    doc = json.loads((tmp_path / "m.json").read_text())
    bad = dict(doc, ranks=[3])
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    with pytest.raises(ValueError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "bad.json").write_text(json.dumps(dict(doc, format="other")))
    with pytest.raises(ValueError):
        load_model(tmp_path / "bad.json")
    (tmp_path / "m.a.tns").unlink()
    with pytest.raises(OSError):
        load_model(tmp_path / "m.json")


def test_predict_dim_mismatch(small):
    _, d = small
    with pytest.raises(ValueError):
        predict(random_model("cp", (5, 4, 2), (2,), 0), d)


def test_cp_smaller_than_gmp_below_break_even():
    for dims in itertools.product((2, 5, 11), (3, 10), (4, 8)):
        full = param_count("gmp", dims)
        for r in range(1, 30):
            if r < full / sum(dims):
                assert param_count("cp", dims, (r,)) < full


def test_flops_increase_with_each_rank():
    dims = (11, 10, 8)
    for r in range(1, 6):
        assert flop_count("cp", dims, (r + 1,)) > flop_count("cp", dims, (r,))
        for k in range(2):
            lo, hi = [2, 2], [2, 2]
            hi[k] = 3
            assert flop_count("tt", dims, hi) > flop_count("tt", dims, lo)
        for k in range(3):
            lo, hi = [2, 2, 2], [2, 2, 2]
            hi[k] = r + 2
            lo[k] = r + 1
            assert flop_count("tucker", dims, hi) > flop_count("tucker", dims, lo)
