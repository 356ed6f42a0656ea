"""GMP coefficient models (full, CP, TT, Tucker): prediction, expansion,
parameter and FLOP counts, and model files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import _kernels
from .design import DesignSet
from .tensor import read_tensor, write_tensor

KINDS = ("gmp", "cp", "tt", "tucker")


def _cplx(a) -> np.ndarray:
    return np.asarray(a, dtype=np.complex128)


@dataclass(frozen=True)
class GmpModel:
    s: np.ndarray

    kind = "gmp"

    def __post_init__(self):
        s = _cplx(self.s)
        if s.ndim != 3:
            raise ValueError("GMP coefficient tensor must be of order 3")
        object.__setattr__(self, "s", s)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.s.shape)

    @property
    def ranks(self) -> tuple[int, ...]:
        return ()

    def arrays(self) -> dict[str, np.ndarray]:
        return {"s": self.s}


@dataclass(frozen=True)
class CpModel:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    kind = "cp"

    def __post_init__(self):
        a, b, c = (_cplx(v) for v in (self.a, self.b, self.c))
        if a.ndim != 2 or b.ndim != 2 or c.ndim != 2:
            raise ValueError("CP factors must be matrices")
        if not a.shape[1] == b.shape[1] == c.shape[1]:
            raise ValueError(f"CP factor column counts differ: {a.shape[1]}, {b.shape[1]}, {c.shape[1]}")
        for name, v in zip("abc", (a, b, c)):
            object.__setattr__(self, name, v)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.a.shape[0], self.b.shape[0], self.c.shape[0]

    @property
    def ranks(self) -> tuple[int]:
        return (self.a.shape[1],)

    def arrays(self) -> dict[str, np.ndarray]:
        return {"a": self.a, "b": self.b, "c": self.c}


@dataclass(frozen=True)
class TtModel:
    """``a`` is M1 x R1, ``bcore`` R1 x M2 x R2, ``c`` R2 x P."""

    a: np.ndarray
    bcore: np.ndarray
    c: np.ndarray

    kind = "tt"

    def __post_init__(self):
        a, bcore, c = (_cplx(v) for v in (self.a, self.bcore, self.c))
        if a.ndim != 2 or bcore.ndim != 3 or c.ndim != 2:
            raise ValueError("TT cores must have orders 2, 3, 2")
        if bcore.shape[0] != a.shape[1] or bcore.shape[2] != c.shape[0]:
            raise ValueError(f"TT bond ranks inconsistent: a {a.shape}, bcore {bcore.shape}, c {c.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "bcore", bcore)
        object.__setattr__(self, "c", c)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.a.shape[0], self.bcore.shape[1], self.c.shape[1]

    @property
    def ranks(self) -> tuple[int, int]:
        return self.a.shape[1], self.c.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"a": self.a, "bcore": self.bcore, "c": self.c}


@dataclass(frozen=True)
class TuckerModel:
    g: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    kind = "tucker"

    def __post_init__(self):
        g, a, b, c = (_cplx(v) for v in (self.g, self.a, self.b, self.c))
        if g.ndim != 3 or a.ndim != 2 or b.ndim != 2 or c.ndim != 2:
            raise ValueError("Tucker model needs an order-3 core and three matrices")
        if g.shape != (a.shape[1], b.shape[1], c.shape[1]):
            raise ValueError(f"core shape {g.shape} does not match factor ranks")
        for name, v in zip("gabc", (g, a, b, c)):
            object.__setattr__(self, name, v)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.a.shape[0], self.b.shape[0], self.c.shape[0]

    @property
    def ranks(self) -> tuple[int, int, int]:
        return tuple(self.g.shape)

    def arrays(self) -> dict[str, np.ndarray]:
        return {"g": self.g, "a": self.a, "b": self.b, "c": self.c}


Model = Union[GmpModel, CpModel, TtModel, TuckerModel]
_CLASSES = {"gmp": GmpModel, "cp": CpModel, "tt": TtModel, "tucker": TuckerModel}


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------


def _check_dims(model: Model, design: DesignSet) -> None:
    if tuple(model.dims) != tuple(design.dims):
        raise ValueError(f"model dims {model.dims} do not match design dims {design.dims}")


def predict_factors(model: Model, h: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Model output from the delay matrix and envelope tensor.

    The compressed formats never build the full coefficient tensor.
    """
    n, m2, p = m.shape
    if isinstance(model, GmpModel):
        m1 = h.shape[1]
        env = m.reshape(n, m2 * p) @ model.s.reshape(m1, m2 * p).T
        return np.einsum("ni,ni->n", h, env)
    if isinstance(model, CpModel):
        u = np.einsum("njp,jr,pr->nr", m, model.b, model.c, optimize=True)
        return np.einsum("nr,nr->n", h @ model.a, u)
    if isinstance(model, TtModel):
        q = np.einsum("njp,bp->njb", m, model.c)
        u = np.einsum("njb,ajb->na", q, model.bcore, optimize=True)
        return np.einsum("na,na->n", h @ model.a, u)
    if isinstance(model, TuckerModel):
        e = np.einsum("njp,jb,pc->nbc", m, model.b, model.c, optimize=True)
        return np.einsum("na,abc,nbc->n", h @ model.a, model.g, e, optimize=True)
    raise TypeError(f"unknown model type {type(model).__name__}")


def predict(model: Model, design: DesignSet) -> np.ndarray:
    _check_dims(model, design)
    return predict_factors(model, design.h, design.m)


def simulate(model: Model, x, t0: int, n: int) -> np.ndarray:
    """Run the model over ``x`` for ``t = t0 .. t0+n-1`` with the sample kernels."""
    x = np.asarray(x, dtype=np.complex128)
    depth = max(model.dims[0], model.dims[1])
    if t0 < depth - 1 or t0 + n > x.size or n <= 0:
        raise ValueError(f"window t0={t0}, N={n} does not fit a signal of length {x.size} at depth {depth}")
    if isinstance(model, GmpModel):
        return _kernels.gmp_simulate(x, model.s, t0, n)
    if isinstance(model, CpModel):
        return _kernels.cp_simulate(x, model.a, model.b, model.c, t0, n)
    if isinstance(model, TtModel):
        return _kernels.tt_simulate(x, model.a, model.bcore, model.c, t0, n)
    if isinstance(model, TuckerModel):
        return _kernels.tucker_simulate(x, model.g, model.a, model.b, model.c, t0, n)
    raise TypeError(f"unknown model type {type(model).__name__}")


def expand_to_gmp(model: Model) -> GmpModel:
    if isinstance(model, GmpModel):
        return model
    if isinstance(model, CpModel):
        s = np.einsum("ir,jr,pr->ijp", model.a, model.b, model.c)
    elif isinstance(model, TtModel):
        s = np.einsum("ia,ajb,bp->ijp", model.a, model.bcore, model.c)
    elif isinstance(model, TuckerModel):
        s = np.einsum("abc,ia,jb,pc->ijp", model.g, model.a, model.b, model.c, optimize=True)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return GmpModel(s)


# ---------------------------------------------------------------------------
# complexity
# ---------------------------------------------------------------------------


def _expect_ranks(kind: str, ranks) -> tuple[int, ...]:
    ranks = tuple(int(r) for r in (ranks or ()))
    need = {"gmp": 0, "cp": 1, "tt": 2, "tucker": 3}
    if kind not in need:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if len(ranks) != need[kind]:
        raise ValueError(f"{kind} takes {need[kind]} rank(s), got {ranks}")
    return ranks


def param_count(kind: str, dims, ranks=()) -> int:
    m1, m2, p = (int(v) for v in dims)
    r = _expect_ranks(kind, ranks)
    if kind == "gmp":
        return m1 * m2 * p
    if kind == "cp":
        return r[0] * (m1 + m2 + p)
    if kind == "tt":
        r1, r2 = r
        return r1 * m1 + r2 * p + r1 * r2 * m2
    r1, r2, r3 = r
    return r1 * r2 * r3 + m1 * r1 + m2 * r2 + p * r3


def flop_count(kind: str, dims, ranks=()) -> int:
    """Per-sample running cost, one FLOP per real add or multiply."""
    m1, m2, p = (int(v) for v in dims)
    r = _expect_ranks(kind, ranks)
    if kind == "gmp":
        return 8 * m1 * m2 * p + 2 * (p - 1) * (m1 + m2 - 1) + 8
    if kind == "cp":
        return r[0] * (10 * m2 * p + 8 * m1 + 4) + p + 6
    if kind == "tt":
        r1, r2 = r
        return r1 * (10 * r2 * m2 * p + 8 * m1 + 4) + p + 6
    r1, r2, r3 = r
    return r1 * (r2 * r3 * (10 * m2 * p + 6) + 8 * m1 + 4) + p + 6


def num_params(model: Model) -> int:
    return param_count(model.kind, model.dims, model.ranks)


def num_flops(model: Model) -> int:
    return flop_count(model.kind, model.dims, model.ranks)


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

MODEL_FORMAT = "tgmp-model/1"


def save_model(path, model: Model) -> list[Path]:
    """Write ``path`` (JSON) plus one tensor container per factor.

    Payload files sit next to the document as ``<stem>.<field>.tns``.
    Returns every file written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payloads = {}
    written = []
    for name, arr in model.arrays().items():
        fname = f"{path.stem}.{name}.tns"
        write_tensor(path.parent / fname, arr)
        payloads[name] = {"file": fname, "shape": list(arr.shape)}
        written.append(path.parent / fname)
    doc = {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "dims": list(model.dims),
        "ranks": list(model.ranks),
        "payloads": payloads,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.insert(0, path)
    return written


def load_model(path) -> Model:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file (format {doc.get('format')!r})")
    kind = doc["kind"]
    if kind not in _CLASSES:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    arrays = {name: read_tensor(path.parent / ref["file"]) for name, ref in doc["payloads"].items()}
    model = _CLASSES[kind](**arrays)
    if list(model.dims) != doc["dims"] or list(model.ranks) != doc["ranks"]:
        raise ValueError(f"{path}: payload shapes disagree with the declared dims/ranks")
    return model
