"""Experiment configuration files (YAML).

Unknown keys and wrongly typed values are errors that point at the
offending line.  Every section is optional; omitted values take defaults.

Example::

    seed: 0
    ofdm: {fft_len: 2048, active_subcarriers: 1584, cyclic_prefix_len: 72, num_symbols: 28, rms: 0.2}
    pa: {snr_db: 50}
    windows:
      train: {t0: 100, n: 1024}
      test: {t0: 20, n: 30649}
    projection: {m2: 5, p: 3, oversample: 5, power: 2}
    models:
      - {name: gmp-ls, kind: gmp-ls, dims: [11, 10, 8], gamma: 1.0e-3}
      - {name: cp3, kind: cp, dims: [11, 10, 8], ranks: [3], iterations: 10}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .signals import OfdmConfig, ReferencePa

MODEL_KINDS = ("gmp-ls", "gmp-lasso", "cp", "tt", "tucker")
_RANKS_PER_KIND = {"gmp-ls": 0, "gmp-lasso": 0, "cp": 1, "tt": 2, "tucker": 3}


class ConfigError(ValueError):
    def __init__(self, msg: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {msg}")


@dataclass(frozen=True)
class Window:
    t0: int
    n: int


@dataclass(frozen=True)
class ModelEntry:
    name: str
    kind: str
    dims: tuple[int, int, int] = (11, 10, 8)
    ranks: tuple[int, ...] = ()
    gamma: float = 1e-6
    iterations: int = 10
    rp: bool = False


@dataclass(frozen=True)
class Projection:
    m2: int = 5
    p: int = 3
    oversample: int = 5
    power: int = 2


@dataclass(frozen=True)
class Sweep:
    kind: str
    dims: tuple[int, int, int]
    values: tuple
    ranks: tuple[int, ...] = ()
    gamma: float = 1e-6
    iterations: int = 10


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    snr_db: float = 50.0
    pa_table: tuple | None = None
    train: Window = Window(100, 1024)
    test: Window = Window(20, 30649)
    projection: Projection = Projection()
    models: tuple[ModelEntry, ...] = ()
    repeats: int = 5
    gamma_sweep: Sweep | None = None
    rank_sweep: Sweep | None = None

    def pa(self) -> ReferencePa:
        if self.pa_table is None:
            return ReferencePa(snr_db=self.snr_db)
        return ReferencePa.from_memory_polynomial(np.array(self.pa_table, dtype=complex), self.snr_db)

    def model(self, name: str) -> ModelEntry:
        for m in self.models:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.pa_table is not None:
            d["pa_table"] = [[[complex(v).real, complex(v).imag] for v in row] for row in self.pa_table]
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# node walking
# ---------------------------------------------------------------------------


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, node, msg):
        line = node.start_mark.line + 1 if node is not None else None
        raise ConfigError(msg, self.source, line)

    def mapping(self, node, allowed, what):
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out = {}
        for knode, vnode in node.value:
            key = knode.value
            if key not in allowed:
                self.fail(knode, f"unknown key {key!r} in {what} (allowed: {', '.join(sorted(allowed))})")
            if key in out:
                self.fail(knode, f"duplicate key {key!r} in {what}")
            out[key] = vnode
        return out

    def scalar(self, node, what):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, f"{what} must be a scalar")
        return yaml.safe_load(yaml.serialize(node))

    def int_(self, node, what, minimum=None):
        v = self.scalar(node, what)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(node, f"{what} must be an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(node, f"{what} must be >= {minimum}, got {v}")
        return v

    def float_(self, node, what, minimum=None):
        v = self.scalar(node, what)
        if isinstance(v, str):
            try:
                v = float(v)
            except ValueError:
                self.fail(node, f"{what} must be a number, got {v!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(node, f"{what} must be a number, got {v!r}")
        v = float(v)
        if not np.isfinite(v) and not (what == "pa.snr_db" and v == float("inf")):
            self.fail(node, f"{what} must be finite")
        if minimum is not None and v < minimum:
            self.fail(node, f"{what} must be >= {minimum}, got {v}")
        return v

    def bool_(self, node, what):
        v = self.scalar(node, what)
        if not isinstance(v, bool):
            self.fail(node, f"{what} must be true or false, got {v!r}")
        return v

    def str_(self, node, what, choices=None):
        v = self.scalar(node, what)
        if not isinstance(v, str):
            self.fail(node, f"{what} must be a string")
        if choices and v not in choices:
            self.fail(node, f"{what} must be one of {', '.join(choices)}, got {v!r}")
        return v

    def seq(self, node, what):
        if not isinstance(node, yaml.SequenceNode):
            self.fail(node, f"{what} must be a list")
        return node.value

    def ints(self, node, what, length=None):
        items = self.seq(node, what)
        vals = tuple(self.int_(n, f"{what}[{i}]", 1) for i, n in enumerate(items))
        if length is not None and len(vals) != length:
            self.fail(node, f"{what} needs {length} entries, got {len(vals)}")
        return vals

    def complex_(self, node, what):
        if isinstance(node, yaml.SequenceNode):
            parts = [self.float_(n, what) for n in node.value]
            if len(parts) != 2:
                self.fail(node, f"{what} as a list must be [re, im]")
            return complex(*parts)
        v = self.scalar(node, what)
        try:
            return complex(str(v).replace(" ", ""))
        except ValueError:
            self.fail(node, f"{what} is not a complex number: {v!r}")


def _windows(r, node):
    out = {}
    for key, sub in r.mapping(node, {"train", "test"}, "windows").items():
        f = r.mapping(sub, {"t0", "n"}, f"windows.{key}")
        if "t0" not in f or "n" not in f:
            r.fail(sub, f"windows.{key} needs both t0 and n")
        out[key] = Window(r.int_(f["t0"], f"windows.{key}.t0", 0), r.int_(f["n"], f"windows.{key}.n", 1))
    return out


def _model_entry(r, node, i):
    what = f"models[{i}]"
    f = r.mapping(node, {"name", "kind", "dims", "ranks", "gamma", "iterations", "rp"}, what)
    if "kind" not in f:
        r.fail(node, f"{what} needs a kind")
    kind = r.str_(f["kind"], f"{what}.kind", MODEL_KINDS)
    kw = {"kind": kind, "name": r.str_(f["name"], f"{what}.name") if "name" in f else kind}
    if "dims" in f:
        kw["dims"] = r.ints(f["dims"], f"{what}.dims", 3)
    need = _RANKS_PER_KIND[kind]
    if "ranks" in f:
        kw["ranks"] = r.ints(f["ranks"], f"{what}.ranks", need)
    elif need:
        r.fail(node, f"{what} ({kind}) needs ranks with {need} entr{'y' if need == 1 else 'ies'}")
    if "gamma" in f:
        kw["gamma"] = r.float_(f["gamma"], f"{what}.gamma", 0.0)
    if "iterations" in f:
        kw["iterations"] = r.int_(f["iterations"], f"{what}.iterations", 1)
    if "rp" in f:
        kw["rp"] = r.bool_(f["rp"], f"{what}.rp")
        if kw["rp"] and need == 0:
            r.fail(f["rp"], f"{what}: rp applies only to cp, tt and tucker")
    return ModelEntry(**kw)


def _sweep(r, node, what, rank_sweep):
    f = r.mapping(node, {"kind", "dims", "ranks", "gamma", "iterations", "values"}, what)
    for key in ("kind", "dims", "values"):
        if key not in f:
            r.fail(node, f"{what} needs {key}")
    kind = r.str_(f["kind"], f"{what}.kind", ("cp",) if rank_sweep else MODEL_KINDS)
    kw = {"kind": kind, "dims": r.ints(f["dims"], f"{what}.dims", 3)}
    if rank_sweep:
        kw["values"] = r.ints(f["values"], f"{what}.values")
    else:
        kw["values"] = tuple(r.float_(n, f"{what}.values", 0.0) for n in r.seq(f["values"], f"{what}.values"))
        need = _RANKS_PER_KIND[kind]
        if need:
            if "ranks" not in f:
                r.fail(node, f"{what} ({kind}) needs ranks")
            kw["ranks"] = r.ints(f["ranks"], f"{what}.ranks", need)
    if "gamma" in f:
        kw["gamma"] = r.float_(f["gamma"], f"{what}.gamma", 0.0)
    if "iterations" in f:
        kw["iterations"] = r.int_(f["iterations"], f"{what}.iterations", 1)
    return Sweep(**kw)


_TOP = {"seed", "ofdm", "pa", "windows", "projection", "models", "bench"}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    r = _Reader(source)
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", source,
                          mark.line + 1 if mark else None) from None
    if root is None:
        return ExperimentConfig()
    top = r.mapping(root, _TOP, "config")
    kw: dict = {}
    if "seed" in top:
        kw["seed"] = r.int_(top["seed"], "seed", 0)
    if "ofdm" in top:
        fields = {"fft_len", "active_subcarriers", "cyclic_prefix_len", "num_symbols", "rms"}
        f = r.mapping(top["ofdm"], fields, "ofdm")
        vals = {k: (r.float_(v, f"ofdm.{k}") if k == "rms" else r.int_(v, f"ofdm.{k}")) for k, v in f.items()}
        try:
            kw["ofdm"] = OfdmConfig(**vals, seed=kw.get("seed", 0))
        except ValueError as exc:
            r.fail(top["ofdm"], f"ofdm: {exc}")
    if "pa" in top:
        f = r.mapping(top["pa"], {"snr_db", "memory_polynomial"}, "pa")
        if "snr_db" in f:
            kw["snr_db"] = r.float_(f["snr_db"], "pa.snr_db")
        if "memory_polynomial" in f:
            rows = r.seq(f["memory_polynomial"], "pa.memory_polynomial")
            table = []
            for i, row in enumerate(rows):
                table.append(tuple(r.complex_(v, f"pa.memory_polynomial[{i}]")
                                   for v in r.seq(row, f"pa.memory_polynomial[{i}]")))
            if not table or len({len(t) for t in table}) != 1 or not table[0]:
                r.fail(f["memory_polynomial"], "pa.memory_polynomial must be a non-empty rectangular table")
            kw["pa_table"] = tuple(table)
    if "windows" in top:
        kw.update(_windows(r, top["windows"]))
    if "projection" in top:
        f = r.mapping(top["projection"], {"m2", "p", "oversample", "power"}, "projection")
        vals = {k: r.int_(v, f"projection.{k}", 0 if k == "oversample" else 1) for k, v in f.items()}
        kw["projection"] = Projection(**vals)
    if "models" in top:
        entries = [_model_entry(r, n, i) for i, n in enumerate(r.seq(top["models"], "models"))]
        names = [e.name for e in entries]
        for i, name in enumerate(names):
            if name in names[:i]:
                r.fail(top["models"].value[i], f"duplicate model name {name!r}")
        kw["models"] = tuple(entries)
    if "bench" in top:
        f = r.mapping(top["bench"], {"repeats", "gamma_sweep", "rank_sweep"}, "bench")
        if "repeats" in f:
            kw["repeats"] = r.int_(f["repeats"], "bench.repeats", 1)
        if "gamma_sweep" in f:
            kw["gamma_sweep"] = _sweep(r, f["gamma_sweep"], "bench.gamma_sweep", False)
        if "rank_sweep" in f:
            kw["rank_sweep"] = _sweep(r, f["rank_sweep"], "bench.rank_sweep", True)
    cfg = with_seed(ExperimentConfig(**kw), kw.get("seed", 0))
    _check_windows(cfg, r, root)
    return cfg


def _check_windows(cfg: ExperimentConfig, r: _Reader, root) -> None:
    total = cfg.ofdm.num_samples
    depth = max([max(m.dims[0], m.dims[1]) for m in cfg.models] + [1])
    for name, w in (("train", cfg.train), ("test", cfg.test)):
        if w.t0 + w.n > total:
            r.fail(root, f"windows.{name} [{w.t0}, {w.t0 + w.n - 1}] exceeds the {total} generated samples")
        if w.t0 < depth - 1:
            r.fail(root, f"windows.{name}.t0={w.t0} is below the largest model memory depth {depth} - 1")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    from dataclasses import replace

    return replace(cfg, seed=seed, ofdm=replace(cfg.ofdm, seed=seed))
