"""Identification inputs built from an input/output signal pair."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .tensor import read_tensor, write_tensor


@dataclass(frozen=True)
class DesignSet:
    """``y`` (N), delay matrix ``h`` (N x M1) and envelope tensor ``m`` (N x M2 x P).

    ``h[n, i] = x(t0 + n - i)`` and ``m[n, j, p] = |x(t0 + n - j)|**p``.
    """

    y: np.ndarray
    h: np.ndarray
    m: np.ndarray
    t0: int

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.h.shape[1], self.m.shape[1], self.m.shape[2]

    @property
    def meta(self) -> dict:
        m1, m2, p = self.dims
        return {"t0": self.t0, "N": self.n, "M1": m1, "M2": m2, "P": p}

    def with_envelope(self, m: np.ndarray) -> "DesignSet":
        """Same data with the envelope tensor swapped (e.g. for a projected one)."""
        if m.shape[0] != self.n:
            raise ValueError("envelope tensor has the wrong number of samples")
        return replace(self, m=m)


def _check_window(length: int, t0: int, n: int, depth: int, what: str) -> None:
    if n <= 0:
        raise ValueError("window length N must be positive")
    if t0 - (depth - 1) < 0:
        raise ValueError(f"t0={t0} leaves negative time indices for memory depth {depth}")
    if t0 + n > length:
        raise ValueError(f"window [{t0}, {t0 + n - 1}] exceeds the {what} signal of length {length}")


def build_design(x, y_sig, t0: int, n: int, m1: int, m2: int, p: int) -> DesignSet:
    x = np.asarray(x, dtype=np.complex128)
    y_sig = np.asarray(y_sig, dtype=np.complex128)
    if min(m1, m2, p) < 1:
        raise ValueError("M1, M2 and P must be positive")
    _check_window(x.size, t0, n, max(m1, m2), "input")
    _check_window(y_sig.size, t0, n, 1, "output")
    h, m = _kernels.design(x, t0, n, m1, m2, p)
    return DesignSet(y=y_sig[t0:t0 + n].copy(), h=h, m=m, t0=int(t0))


def build_full_design(x, t0: int, n: int, m1: int, m2: int, p: int) -> np.ndarray:
    """The ``N x M1 x M2 x P`` basis tensor ``X[n,i,j,p] = h[n,i] m[n,j,p]``.

    Only the unstructured GMP solvers need this; it is the memory hotspot.
    """
    x = np.asarray(x, dtype=np.complex128)
    if min(m1, m2, p) < 1:
        raise ValueError("M1, M2 and P must be positive")
    _check_window(x.size, t0, n, max(m1, m2), "input")
    h, m = _kernels.design(x, t0, n, m1, m2, p)
    return full_from_factors(h, m)


def full_from_factors(h: np.ndarray, m: np.ndarray) -> np.ndarray:
    return h[:, :, None, None] * m[:, None, :, :]


def save_design(path, d: DesignSet) -> None:
    """``path`` is a directory; tensors go to containers, meta to JSON."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_tensor(path / "y.tns", d.y)
    write_tensor(path / "h.tns", d.h)
    write_tensor(path / "m.tns", d.m)
    (path / "meta.json").write_text(json.dumps(d.meta, indent=2, sort_keys=True) + "\n")


def load_design(path) -> DesignSet:
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    d = DesignSet(
        y=read_tensor(path / "y.tns"),
        h=read_tensor(path / "h.tns"),
        m=read_tensor(path / "m.tns", real=True),
        t0=int(meta["t0"]),
    )
    if d.meta != meta:
        raise ValueError(f"{path}: meta.json does not match the stored tensors")
    return d
