"""Randomized sequentially truncated HOSVD and the mode-2/3 projection of the
envelope tensor used by RP-ALS."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import frobenius_norm, mode_product, tensor_from_bytes, tensor_to_bytes, unfold

_PROJ_MAGIC = b"TGMPPRJ1"
_ORTHO_TOL = 1e-8


def _mode_rng(seed: int, mode: int) -> np.random.Generator:
    # one child stream per mode keeps each sketch independent of the others
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(mode,)))


def _orthonormal_columns(c: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(c)
    eye = np.eye(q.shape[1])
    if np.max(np.abs(q.conj().T @ q - eye)) > _ORTHO_TOL:
        q, _ = np.linalg.qr(q)
    return q


def range_sketch(xk: np.ndarray, rank: int, oversample: int, power: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormal basis for the range of ``(X X^H)^power G`` truncated to ``rank``.

    The powers are applied one multiplication pair at a time with an
    orthonormalization in between.  Each QR only right-multiplies by an upper
    triangular factor, so the leading columns of the final basis are the
    same as those of a single QR of the fully powered sketch.
    """
    rows = xk.shape[0]
    g = rng.standard_normal((rows, rank + oversample))
    c = g
    for _ in range(max(power, 1)):
        c = _orthonormal_columns(xk @ (xk.conj().T @ c))
    return c[:, :rank]


def randomized_sthosvd(
    x: np.ndarray,
    ranks: Sequence[int],
    oversample: int = 5,
    power: int = 2,
    seed: int = 0,
    modes: Sequence[int] | None = None,
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Randomized STHOSVD.

    Returns ``(core, factors)`` with ``x ~= core x_1 Q1 x_2 ... x_d Qd``.
    ``modes`` restricts the truncation to a subset of modes (processed in the
    given order); skipped modes get ``None`` in ``factors``.
    """
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("input tensor has non-finite entries")
    ranks = [int(r) for r in ranks]
    if len(ranks) != x.ndim:
        raise ValueError(f"expected {x.ndim} ranks, got {len(ranks)}")
    if oversample < 0:
        raise ValueError("oversample must be >= 0")
    if power < 1:
        raise ValueError("power must be >= 1")
    for k, (r, n) in enumerate(zip(ranks, x.shape)):
        if not 1 <= r <= n:
            raise ValueError(f"rank {r} on mode {k} must lie in [1, {n}]")

    order = range(x.ndim) if modes is None else list(modes)
    factors: list[np.ndarray | None] = [None] * x.ndim
    core = x
    for k in order:
        q = range_sketch(unfold(core, k), ranks[k], oversample, power, _mode_rng(seed, k))
        factors[k] = q
        core = mode_product(core, k, q.conj().T)
    return core, factors


@dataclass(frozen=True)
class ProjectionPair:
    u2: np.ndarray
    u3: np.ndarray
    core: np.ndarray
    approx_error: float
    seed: int = 0

    @property
    def target(self) -> tuple[int, int]:
        return self.u2.shape[1], self.u3.shape[1]

    def reconstruct(self) -> np.ndarray:
        """``core x_2 U2 x_3 U3``, the approximation of the envelope tensor."""
        return mode_product(mode_product(self.core, 1, self.u2), 2, self.u3)

    def residual_norm(self, m: np.ndarray) -> float:
        return frobenius_norm(m - self.reconstruct())

    def to_bytes(self) -> bytes:
        blobs = [tensor_to_bytes(t) for t in (self.u2, self.u3, self.core)]
        header = {
            "m2_proj": int(self.u2.shape[1]),
            "p_proj": int(self.u3.shape[1]),
            "seed": int(self.seed),
            "approx_error": float(self.approx_error).hex(),
            "sizes": [len(b) for b in blobs],
        }
        hb = json.dumps(header, sort_keys=True).encode()
        return _PROJ_MAGIC + struct.pack("<Q", len(hb)) + hb + b"".join(blobs)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ProjectionPair":
        if buf[:8] != _PROJ_MAGIC:
            raise ValueError("not a projection file (bad magic bytes)")
        (hlen,) = struct.unpack_from("<Q", buf, 8)
        header = json.loads(buf[16:16 + hlen])
        pos = 16 + hlen
        parts = []
        for size in header["sizes"]:
            parts.append(tensor_from_bytes(buf[pos:pos + size], real=True))
            pos += size
        u2, u3, core = parts
        return cls(u2, u3, core, float.fromhex(header["approx_error"]), int(header["seed"]))


def project_modes_23(
    m: np.ndarray,
    target: tuple[int, int],
    oversample: int = 5,
    power: int = 2,
    seed: int = 0,
) -> ProjectionPair:
    """Truncate the envelope tensor ``m`` (``N x M2 x P``) on modes 2 and 3.

    The time mode is left untouched so the projected tensor still lines up
    with the output samples.
    """
    m = np.asarray(m)
    if m.ndim != 3:
        raise ValueError("envelope tensor must be of order 3")
    if np.iscomplexobj(m):
        if np.any(m.imag != 0):
            raise ValueError("envelope tensor must be real")
        m = m.real
    m2_proj, p_proj = (int(v) for v in target)
    _, m2, p = m.shape
    if not (1 <= m2_proj <= m2 and 1 <= p_proj <= p):
        raise ValueError(f"projection ranks {(m2_proj, p_proj)} exceed envelope dims {(m2, p)}")
    core, factors = randomized_sthosvd(
        m, (m.shape[0], m2_proj, p_proj), oversample=oversample, power=power, seed=seed, modes=(1, 2)
    )
    u2, u3 = factors[1], factors[2]
    approx = mode_product(mode_product(core, 1, u2), 2, u3)
    return ProjectionPair(u2=u2, u3=u3, core=core, approx_error=frobenius_norm(m - approx), seed=seed)
