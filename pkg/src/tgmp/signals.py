"""Synthetic PA data: an OFDM/16-QAM baseband source, a reference nonlinear PA
with memory, and complex AWGN at a target SNR."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .seeds import component_rng
from .tensor import read_tensor, write_tensor

# Gray code on one axis, indexed by 2*b0 + b1: 00 -> -3, 01 -> -1, 10 -> +3, 11 -> +1
_LEVEL_LUT = np.array([-3, -1, 3, 1], dtype=np.float64)
QAM16_SCALE = 1.0 / math.sqrt(10.0)


def qam16_map(bits) -> np.ndarray:
    """Gray-mapped 16-QAM with unit average power.

    Each group of four bits ``b0 b1 b2 b3`` maps ``b0 b1`` to the in-phase
    level and ``b2 b3`` to the quadrature level, levels ``00 -> -3``,
    ``01 -> -1``, ``11 -> +1``, ``10 -> +3``.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % 4:
        raise ValueError(f"bit count {bits.size} is not divisible by 4")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    b = bits.reshape(-1, 4)
    re = _LEVEL_LUT[2 * b[:, 0] + b[:, 1]]
    im = _LEVEL_LUT[2 * b[:, 2] + b[:, 3]]
    return (re + 1j * im) * QAM16_SCALE


@dataclass(frozen=True)
class OfdmConfig:
    fft_len: int = 2048
    active_subcarriers: int = 1584
    cyclic_prefix_len: int = 72
    num_symbols: int = 28
    rms: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("fft_len", "active_subcarriers", "num_symbols"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cyclic_prefix_len < 0:
            raise ValueError("cyclic_prefix_len must be >= 0")
        if self.active_subcarriers >= self.fft_len:
            raise ValueError("active_subcarriers must leave the DC bin unused (< fft_len)")
        if self.cyclic_prefix_len > self.fft_len:
            raise ValueError("cyclic_prefix_len cannot exceed fft_len")
        if not self.rms > 0:
            raise ValueError("rms must be positive")

    @property
    def num_samples(self) -> int:
        return self.num_symbols * (self.fft_len + self.cyclic_prefix_len)


def active_bins(fft_len: int, active: int) -> np.ndarray:
    """Subcarrier bins, split around DC (bin 0 is never used)."""
    n_pos = (active + 1) // 2
    n_neg = active // 2
    return np.r_[np.arange(1, n_pos + 1), np.arange(fft_len - n_neg, fft_len)]


def ofdm_generate(cfg: OfdmConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Baseband OFDM signal with average power ``cfg.rms**2``.

    Without an explicit ``rng`` the bits come from ``cfg.seed``.
    """
    if rng is None:
        rng = component_rng(cfg.seed, "ofdm")
    bins = active_bins(cfg.fft_len, cfg.active_subcarriers)
    scale = cfg.rms * cfg.fft_len / math.sqrt(cfg.active_subcarriers)
    out = np.empty(cfg.num_samples, dtype=np.complex128)
    sym_len = cfg.fft_len + cfg.cyclic_prefix_len
    spectrum = np.zeros(cfg.fft_len, dtype=np.complex128)
    for s in range(cfg.num_symbols):
        bits = rng.integers(0, 2, size=4 * cfg.active_subcarriers)
        spectrum[:] = 0
        spectrum[bins] = qam16_map(bits)
        body = np.fft.ifft(spectrum) * scale
        start = s * sym_len
        if cfg.cyclic_prefix_len:
            out[start:start + cfg.cyclic_prefix_len] = body[-cfg.cyclic_prefix_len:]
        out[start + cfg.cyclic_prefix_len:start + sym_len] = body
    return out


# ---------------------------------------------------------------------------
# reference power amplifier
# ---------------------------------------------------------------------------

# Built-in PA, valid for inputs with RMS amplitude near 0.2:
#
#   y(t) = sum_i LIN[i] x(t-i)
#        + (sum_i NL_TAPS[i] x(t-i)) * sum_j ENV_WINDOW[j] sum_p POLY[p] |x(t-j)|^p
#
# i.e. an 11-tap linear response plus a gain compression driven by a 10-sample
# sliding average of an odd-order envelope polynomial (|x|^2 and |x|^4 terms).
# Memory depth 11, order 5 (p = 0..4).  As a GMP coefficient tensor it has CP rank 2 and multilinear
# rank (2, 2, 2).
REFERENCE_LINEAR_TAPS = np.array(
    [1.0, 0.2 - 0.1j, -0.08 + 0.05j, 0.04, 0.02j, -0.015, 0.01, 0.006, -0.004, 0.002, 0.001]
)
REFERENCE_NL_TAPS = np.array([1.0, -0.1 + 0.05j])
REFERENCE_ENV_WINDOW = np.full(10, 0.1)
REFERENCE_POLY = np.array([0.0, 0.0, -0.8 - 0.3j, 0.0, 0.3])


def reference_coefficients() -> np.ndarray:
    """The built-in PA as an ``11 x 11 x 5`` GMP coefficient tensor."""
    depth = REFERENCE_LINEAR_TAPS.size
    order = REFERENCE_POLY.size
    s = np.zeros((depth, depth, order), dtype=np.complex128)
    s[:, 0, 0] = REFERENCE_LINEAR_TAPS
    nl = np.zeros(depth, dtype=np.complex128)
    nl[:REFERENCE_NL_TAPS.size] = REFERENCE_NL_TAPS
    env = np.zeros(depth)
    env[:REFERENCE_ENV_WINDOW.size] = REFERENCE_ENV_WINDOW
    poly = REFERENCE_POLY.copy()
    poly[0] = 0.0
    s += np.einsum("i,j,p->ijp", nl, env, poly)
    return s


@dataclass(frozen=True)
class ReferencePa:
    """PA defined by a GMP coefficient tensor ``coeffs[i, j, p]``.

    Output: ``sum_ijp coeffs[i,j,p] x(t-i) |x(t-j)|^p`` plus AWGN at ``snr_db``
    relative to the clean output power.  A memory polynomial is the special
    case where the tensor is diagonal in ``(i, j)``; build one with
    :meth:`from_memory_polynomial`.
    """

    coeffs: np.ndarray = field(default_factory=reference_coefficients)
    snr_db: float = 50.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 3 or min(c.shape) < 1:
            raise ValueError("coeffs must be a non-empty order-3 tensor")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_memory_polynomial(cls, table, snr_db: float = 50.0) -> "ReferencePa":
        """``table[m, p]`` weights ``x(t-m) |x(t-m)|^p``."""
        table = np.atleast_2d(np.asarray(table, dtype=np.complex128))
        depth, order = table.shape
        s = np.zeros((depth, depth, order), dtype=np.complex128)
        s[np.arange(depth), np.arange(depth), :] = table
        return cls(coeffs=s, snr_db=snr_db)

    @property
    def memory_depth(self) -> int:
        return max(self.coeffs.shape[0], self.coeffs.shape[1])

    @property
    def order(self) -> int:
        return self.coeffs.shape[2]


def reference_pa_clean(x: np.ndarray, pa: ReferencePa) -> np.ndarray:
    """Noise-free PA output; samples before ``t = 0`` are taken as zero."""
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise ValueError("empty input signal")
    pad = pa.memory_depth - 1
    xp = np.concatenate([np.zeros(pad, dtype=np.complex128), x])
    return _kernels.gmp_simulate(xp, pa.coeffs, pad, x.size)


def awgn(clean: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian noise whose power sits ``snr_db`` below ``clean``'s."""
    if math.isinf(snr_db) and snr_db > 0:
        return np.zeros_like(clean)
    power = float(np.mean(np.abs(clean) ** 2)) / 10.0 ** (snr_db / 10.0)
    sigma = math.sqrt(power / 2.0)
    return sigma * (rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size))


def reference_pa_apply(x: np.ndarray, pa: ReferencePa, seed: int = 0,
                       rng: np.random.Generator | None = None) -> np.ndarray:
    clean = reference_pa_clean(x, pa)
    if rng is None:
        rng = component_rng(seed, "noise")
    return clean + awgn(clean, pa.snr_db, rng)


def snr_db(clean: np.ndarray, noise: np.ndarray) -> float:
    return 10.0 * math.log10(float(np.sum(np.abs(clean) ** 2)) / float(np.sum(np.abs(noise) ** 2)))


def am_am(x: np.ndarray, y: np.ndarray, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Mean gain ``|y|/|x|`` in input-power quantile bins.

    Returns ``(bin centre input power, mean gain)``; empty bins are dropped.
    """
    p_in = np.abs(x) ** 2
    mask = p_in > 0
    p_in, gain = p_in[mask], np.abs(y[mask]) / np.abs(x[mask])
    edges = np.quantile(p_in, np.linspace(0.0, 1.0, bins + 1))
    idx = np.clip(np.searchsorted(edges, p_in, side="right") - 1, 0, bins - 1)
    centres, gains = [], []
    for b in range(bins):
        sel = idx == b
        if np.any(sel):
            centres.append(p_in[sel].mean())
            gains.append(gain[sel].mean())
    return np.array(centres), np.array(gains)


# ---------------------------------------------------------------------------
# signal files
# ---------------------------------------------------------------------------


def write_signal(path, x: np.ndarray) -> None:
    """CSV (``t,re,im``) for ``.csv`` paths, the tensor container otherwise."""
    path = Path(path)
    x = np.asarray(x, dtype=np.complex128)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "re", "im"])
            for t, v in enumerate(x):
                w.writerow([t, repr(float(v.real)), repr(float(v.imag))])
    else:
        write_tensor(path, x)


def read_signal(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if [h.strip() for h in header] != ["t", "re", "im"]:
                raise ValueError(f"{path}: expected header 't,re,im', got {header}")
            rows = [(int(t), float(re), float(im)) for t, re, im in reader]
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: sample index column is not 0..N-1")
        return np.array([complex(re, im) for _, re, im in rows], dtype=np.complex128)
    x = read_tensor(path)
    if x.ndim != 1:
        raise ValueError(f"{path}: expected an order-1 tensor, got order {x.ndim}")
    return x
