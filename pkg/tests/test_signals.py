import numpy as np
import pytest

from tgmp.design import build_design
from tgmp.metrics import nmse
from tgmp.seeds import component_int, component_rng
from tgmp.signals import (
    OfdmConfig,
    ReferencePa,
    am_am,
    awgn,
    ofdm_generate,
    qam16_map,
    read_signal,
    reference_pa_apply,
    reference_pa_clean,
    snr_db,
    write_signal,
)
from tgmp.solvers import RankDeficientWarning, ridge_ls


def test_qam16_corners_and_power():
    s = 1 / np.sqrt(10)
    assert qam16_map([0, 0, 0, 0])[0] == pytest.approx((-3 - 3j) * s)
    assert qam16_map([1, 0, 1, 1])[0] == pytest.approx((3 + 1j) * s)
    assert qam16_map([0, 1, 1, 0])[0] == pytest.approx((-1 + 3j) * s)
    bits = np.array([[(k >> b) & 1 for b in range(4)] for k in range(16)]).ravel()
    pts = qam16_map(bits)
    assert len(set(np.round(pts, 12))) == 16
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        qam16_map([0, 1, 1])
    with pytest.raises(ValueError):
        qam16_map([0, 1, 2, 1])


def test_ofdm_default_length_and_power():
    x = ofdm_generate(OfdmConfig())
    assert x.size == 28 * (2048 + 72) == 59360
    assert np.sqrt(np.mean(np.abs(x) ** 2)) == pytest.approx(0.2, rel=0.02)


def test_ofdm_cyclic_prefix_and_single_tone():
    cfg = OfdmConfig(fft_len=16, active_subcarriers=1, cyclic_prefix_len=4, num_symbols=3)
    x = ofdm_generate(cfg)
    assert x.size == 60
    for s in range(3):
        sym = x[20 * s:20 * (s + 1)]
        assert np.array_equal(sym[:4], sym[-4:])
        spec = np.fft.fft(sym[4:])
        assert np.count_nonzero(np.abs(spec) > 1e-12) == 1 and abs(spec[1]) > 0
        assert np.allclose(np.abs(sym), np.abs(sym[0]))


def test_ofdm_seeded():
    a = ofdm_generate(OfdmConfig(num_symbols=2, seed=1))
    b = ofdm_generate(OfdmConfig(num_symbols=2, seed=1))
    c = ofdm_generate(OfdmConfig(num_symbols=2, seed=2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_ofdm_config_validation():
    for kw in ({"fft_len": 0}, {"active_subcarriers": 2048}, {"cyclic_prefix_len": -1}, {"rms": 0.0}):
        with pytest.raises(ValueError):
            OfdmConfig(**kw)


def test_identity_pa():
    x = ofdm_generate(OfdmConfig(num_symbols=1))
    s = np.zeros((1, 1, 1), dtype=complex)
    s[0, 0, 0] = 1.0
    assert np.array_equal(reference_pa_clean(x, ReferencePa(s, snr_db=np.inf)), x)
    assert np.array_equal(reference_pa_apply(x, ReferencePa(s, snr_db=np.inf)), x)


def test_memoryless_cubic_closed_form():
    x = ofdm_generate(OfdmConfig(num_symbols=1))
    a3 = -0.5 + 0.1j
    pa = ReferencePa.from_memory_polynomial([[1.0, 0.0, a3]], snr_db=np.inf)
    y = reference_pa_clean(x, pa)
    assert np.allclose(y, x + a3 * x * np.abs(x) ** 2, rtol=1e-14, atol=1e-16)


def test_memory_polynomial_delays_start_at_zero():
    x = np.array([1.0, 2.0, 3.0], dtype=complex)
    pa = ReferencePa.from_memory_polynomial([[1.0], [0.5]], snr_db=np.inf)
    assert np.allclose(reference_pa_clean(x, pa), [1.0, 2.5, 4.0])


def test_snr_matches_request():
    x = ofdm_generate(OfdmConfig())
    pa = ReferencePa()
    clean = reference_pa_clean(x, pa)
    y = reference_pa_apply(x, pa, seed=5)
    assert abs(snr_db(clean, y - clean) - 50.0) <= 0.2
    noise = awgn(clean, 20.0, np.random.default_rng(1))
    assert abs(snr_db(clean, noise) - 20.0) <= 0.2


def test_reference_pa_is_compressive():
    x = ofdm_generate(OfdmConfig())
    y = reference_pa_clean(x, ReferencePa())
    p_in, gain = am_am(x, y, bins=20)
    assert p_in.size == 20 and np.all(np.diff(p_in) > 0)
    assert gain[-1] < gain[0]


def test_reference_pa_shape():
    pa = ReferencePa()
    assert pa.memory_depth == 11 and pa.order == 5


def test_planted_truth_is_representable():
    x = ofdm_generate(OfdmConfig())
    pa = ReferencePa(snr_db=np.inf)
    y = reference_pa_clean(x, pa)
    d = build_design(x, y, 100, 2048, 11, 11, 5)
    # the p = 0 slices are collinear across j, so only the output is unique
    with pytest.warns(RankDeficientWarning):
        model = ridge_ls(d, 0.0)
    d_test = build_design(x, y, 20000, 4096, 11, 11, 5)
    from tgmp.models import predict
    assert nmse(predict(model, d_test), d_test.y) <= -150


def test_signal_files_round_trip(tmp_path):
    x = ofdm_generate(OfdmConfig(num_symbols=1)) * (1 + 1e-9j)
    for name in ("x.csv", "x.tns"):
        write_signal(tmp_path / name, x)
        assert np.array_equal(read_signal(tmp_path / name), x)
    (tmp_path / "bad.csv").write_text("a,b,c\n0,1,2\n")
    with pytest.raises(ValueError):
        read_signal(tmp_path / "bad.csv")


def test_component_seeds_are_independent():
    a = component_rng(0, "ofdm").standard_normal(4)
    b = component_rng(0, "noise").standard_normal(4)
    assert not np.allclose(a, b)
    assert component_int(0, "sketch") == component_int(0, "sketch")
    assert component_int(0, "sketch") != component_int(1, "sketch")
    with pytest.raises(ValueError):
        component_rng(0, "bogus")
