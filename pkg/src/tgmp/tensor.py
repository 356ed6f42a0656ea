"""Dense tensor arithmetic under the first-index-fastest (column-major) layout.

Tensors are plain ``numpy.ndarray`` objects.  All unfoldings, vectorizations
and reshapes in this package use Fortran order, so the flat index of a
multi-index ``(i1, ..., id)`` (0-based) is ``i1 + i2*I1 + i3*I1*I2 + ...``.
Every solver that reshapes a least-squares solution back into a factor relies
on this convention.
"""

from __future__ import annotations

import struct
from functools import reduce
from typing import BinaryIO, Sequence

import numpy as np

MAGIC = b"TGMPTNS1"
MAX_ORDER = 6


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def _check_mode(t: np.ndarray, k: int) -> None:
    if not 0 <= k < t.ndim:
        raise ShapeError(f"mode {k} out of range for an order-{t.ndim} tensor")


def flat_index(index: Sequence[int], shape: Sequence[int]) -> int:
    """Offset of ``index`` in a column-major tensor of ``shape`` (0-based)."""
    if len(index) != len(shape):
        raise ShapeError("index and shape lengths differ")
    offset, stride = 0, 1
    for i, n in zip(index, shape):
        if not 0 <= i < n:
            raise IndexError(f"index {tuple(index)} out of bounds for shape {tuple(shape)}")
        offset += i * stride
        stride *= n
    return offset


def vectorize(t: np.ndarray) -> np.ndarray:
    return np.ravel(t, order="F")


def unvectorize(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    v = np.asarray(v)
    if v.size != int(np.prod(shape)):
        raise ShapeError(f"cannot reshape {v.size} entries into {tuple(shape)}")
    return np.reshape(v, tuple(shape), order="F")


def unfold(t: np.ndarray, k: int) -> np.ndarray:
    """Mode-``k`` unfolding: ``I_k x prod(I_j, j != k)``.

    Column ``l`` is the mode-``k`` fiber whose remaining indices, in their
    original order, map to ``l`` under the column-major merge.
    """
    t = np.asarray(t)
    _check_mode(t, k)
    return np.reshape(np.moveaxis(t, k, 0), (t.shape[k], -1), order="F")


def fold(mat: np.ndarray, k: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    if not 0 <= k < len(shape):
        raise ShapeError(f"mode {k} out of range for an order-{len(shape)} tensor")
    rest = shape[:k] + shape[k + 1:]
    mat = np.asarray(mat)
    if mat.shape != (shape[k], int(np.prod(rest))):
        raise ShapeError(f"matrix of shape {mat.shape} cannot fold into {shape} along mode {k}")
    return np.moveaxis(np.reshape(mat, (shape[k],) + rest, order="F"), 0, k)


def mode_product(t: np.ndarray, k: int, q: np.ndarray) -> np.ndarray:
    """``t x_k q`` for a matrix ``q`` of shape ``(n, I_k)``."""
    t = np.asarray(t)
    q = np.asarray(q)
    _check_mode(t, k)
    if q.ndim != 2 or q.shape[1] != t.shape[k]:
        raise ShapeError(f"matrix of shape {q.shape} does not act on mode {k} of size {t.shape[k]}")
    out = np.tensordot(t, q, axes=([k], [1]))
    return np.moveaxis(out, -1, k)


def mode_vec_product(t: np.ndarray, k: int, v: np.ndarray) -> np.ndarray:
    """``t x_k v`` for a vector; the result drops mode ``k``."""
    t = np.asarray(t)
    v = np.asarray(v)
    _check_mode(t, k)
    if v.ndim != 1 or v.shape[0] != t.shape[k]:
        raise ShapeError(f"vector of length {v.shape} does not act on mode {k} of size {t.shape[k]}")
    return np.tensordot(t, v, axes=([k], [0]))


def contract_leading(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Contract every trailing mode of ``x`` (``N x I1 x ... x Id``) with ``s``."""
    x = np.asarray(x)
    s = np.asarray(s)
    if x.shape[1:] != s.shape:
        raise ShapeError(f"trailing shape {x.shape[1:]} does not match {s.shape}")
    return np.tensordot(x, s, axes=s.ndim) if s.ndim else x * s


def kron(*factors: np.ndarray) -> np.ndarray:
    """Kronecker product of vectors or matrices, left to right."""
    if not factors:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, (np.asarray(f) for f in factors))


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard product of shapes {a.shape} and {b.shape}")
    return a * b


def outer(*vectors: np.ndarray) -> np.ndarray:
    if not vectors:
        raise ValueError("outer needs at least one vector")
    out = np.asarray(vectors[0])
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v))
    return out


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.ravel(t)))


# ---------------------------------------------------------------------------
# binary container
#
#   magic (8 bytes) | order d (uint64 LE) | shape (d x uint64 LE)
#   | data: interleaved (re, im) float64 LE, column-major order
# ---------------------------------------------------------------------------


def tensor_to_bytes(t: np.ndarray) -> bytes:
    t = np.asarray(t)
    if t.ndim > MAX_ORDER:
        raise ShapeError(f"order {t.ndim} exceeds the supported maximum {MAX_ORDER}")
    flat = vectorize(t).astype(np.complex128)
    inter = np.empty(2 * flat.size, dtype="<f8")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    header = MAGIC + struct.pack("<Q", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    return header + inter.tobytes()


def tensor_from_bytes(buf: bytes, real: bool = False) -> np.ndarray:
    """Decode a container; ``real=True`` drops the (zero) imaginary parts."""
    if buf[:8] != MAGIC:
        raise ValueError("not a tensor container (bad magic bytes)")
    (order,) = struct.unpack_from("<Q", buf, 8)
    if order > MAX_ORDER:
        raise ValueError(f"container order {order} exceeds {MAX_ORDER}")
    shape = struct.unpack_from(f"<{order}Q", buf, 16)
    start = 16 + 8 * order
    count = int(np.prod(shape, dtype=np.int64))
    if len(buf) < start + 16 * count:
        raise ValueError(f"truncated tensor container: expected {start + 16 * count} bytes, got {len(buf)}")
    flat = np.frombuffer(buf, dtype="<c16", count=count, offset=start).astype(np.complex128)
    if real:
        flat = flat.real.copy()
    return unvectorize(flat, shape)


def write_tensor(fh: BinaryIO | str, t: np.ndarray) -> None:
    data = tensor_to_bytes(t)
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, "wb") as f:
            f.write(data)
    else:
        fh.write(data)


def read_tensor(fh: BinaryIO | str, real: bool = False) -> np.ndarray:
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, "rb") as f:
            buf = f.read()
    else:
        buf = fh.read()
    return tensor_from_bytes(buf, real=real)
