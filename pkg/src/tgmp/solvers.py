"""Identification: ridge LS and LASSO (FISTA / PGD) for the full GMP model,
ALS for the CP, TT and Tucker formats, and randomized-projection ALS."""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .design import DesignSet, full_from_factors
from .metrics import nmse
from .models import CpModel, GmpModel, Model, TtModel, TuckerModel, predict_factors
from .rsthosvd import ProjectionPair, project_modes_23
from .seeds import component_int, component_rng
from .tensor import mode_product

BLOCKS = {"cp": ("a", "b", "c"), "tt": ("a", "bcore", "c"), "tucker": ("g", "a", "b", "c")}
_MODEL_CLASSES = {"cp": CpModel, "tt": TtModel, "tucker": TuckerModel}
_RANK_COUNT = {"cp": 1, "tt": 2, "tucker": 3}


class RankDeficientWarning(UserWarning):
    """A gamma = 0 subproblem was singular; a minimum-norm solution was used."""


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 1e-6
    iterations: int = 10
    seed: int = 0
    init_scale: float = 0.1
    record_objective: bool = True
    oversample: int = 5
    power: int = 2

    def __post_init__(self):
        if not (self.gamma >= 0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a finite value >= 0, got {self.gamma}")
        if int(self.iterations) < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")
        if self.oversample < 0 or self.power < 1:
            raise ValueError("oversample must be >= 0 and power >= 1")


@dataclass
class TraceEntry:
    iteration: int
    block: str
    objective: float
    fit: float
    nmse: float
    elapsed_ms: float


@dataclass
class FitReport:
    """Per-solve history of one identification run.

    ``objective`` is the full regularized objective, ``fit`` the squared
    residual norm alone.  ``train_nmse_trace`` has one value per iteration.
    """

    kind: str
    entries: list[TraceEntry] = field(default_factory=list)
    train_nmse_trace: list[float] = field(default_factory=list)
    iteration_times: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    rank_deficient: bool = False
    max_normal_residual: float = 0.0

    @property
    def objective_trace(self) -> list[float]:
        return [e.objective for e in self.entries]

    @property
    def fit_trace(self) -> list[float]:
        return [e.fit for e in self.entries]

    def to_csv(self, timings: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["iteration", "block", "objective", "fit", "nmse_db"]
        w.writerow(cols + (["elapsed_ms"] if timings else []))
        for e in self.entries:
            row = [e.iteration, e.block, repr(e.objective), repr(e.fit), repr(e.nmse)]
            if timings:
                row.append(f"{e.elapsed_ms:.3f}")
            w.writerow(row)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# regularized least squares
# ---------------------------------------------------------------------------


def solve_ridge(d: np.ndarray, y: np.ndarray, gamma: float) -> tuple[np.ndarray, bool, float]:
    """``argmin ||y - d x||^2 + gamma ||x||^2`` through the normal equations.

    Returns ``(x, rank_deficient, relative normal-equation residual)``.  For
    ``gamma = 0`` a rank-deficient ``d`` gets the minimum-norm solution.
    """
    k = d.shape[1]
    dh = d.conj().T
    gram = dh @ d
    rhs = dh @ y
    deficient = False
    if gamma > 0:
        gram[np.diag_indices(k)] += gamma
        try:
            x = scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram, lower=True), rhs)
        except np.linalg.LinAlgError:
            x = scipy.linalg.solve(gram, rhs, assume_a="her")
    else:
        # same cutoff as numpy.linalg.lstsq; scipy's default keeps roundoff-level values
        cond = np.finfo(np.float64).eps * max(d.shape)
        x, _, rank, _ = scipy.linalg.lstsq(d, y, cond=cond, lapack_driver="gelsd")
        deficient = rank < k
    denom = np.linalg.norm(rhs)
    res = np.linalg.norm(gram @ x - rhs) / denom if denom > 0 else 0.0
    return x, deficient, float(res)


def gmp_matrix(design: DesignSet) -> np.ndarray:
    """Mode-1 unfolding of the full basis tensor (``N x M1 M2 P``)."""
    return full_from_factors(design.h, design.m).reshape(design.n, -1, order="F")


def ridge_ls(design: DesignSet, gamma: float) -> GmpModel:
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    x = gmp_matrix(design)
    s, deficient, _ = solve_ridge(x, design.y, gamma)
    if deficient:
        warnings.warn("ridge system is rank deficient; returning the minimum-norm solution",
                      RankDeficientWarning, stacklevel=2)
    return GmpModel(s.reshape(design.dims, order="F"))


def spectral_norm(x: np.ndarray, seed: int = 0, max_iter: int = 200, tol: float = 1e-6) -> float:
    """Largest singular value by power iteration on ``X^H X``."""
    rng = component_rng(seed, "power")
    v = rng.standard_normal(x.shape[1]) + 1j * rng.standard_normal(x.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = x.conj().T @ (x @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new = np.sqrt(nw)
        v = w / nw
        if abs(new - sigma) <= tol * new:
            return float(new)
        sigma = new
    return float(sigma)


def soft_threshold(z: np.ndarray, level: float) -> np.ndarray:
    """Complex soft-threshold; entries with ``|z| <= level`` become exactly 0."""
    mag = np.abs(z)
    out = np.zeros_like(z)
    keep = mag > level
    out[keep] = z[keep] * (1.0 - level / mag[keep])
    return out


def lasso_objective(x: np.ndarray, y: np.ndarray, s: np.ndarray, gamma: float) -> float:
    """``0.5 ||y - X s||^2 + gamma ||s||_1``, the objective the iteration minimizes."""
    r = y - x @ s
    return float(0.5 * np.vdot(r, r).real + gamma * np.sum(np.abs(s)))


def _proximal(design, gamma, iterations, momentum, seed, x=None):
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    x = gmp_matrix(design) if x is None else x
    y = design.y
    norm = spectral_norm(x, seed=seed)
    alpha = 1.0 / norm**2 if norm > 0 else 0.0
    level = alpha * gamma
    s_prev = np.zeros(x.shape[1], dtype=np.complex128)
    s = s_prev.copy()
    report = FitReport("fista" if momentum else "pgd")
    t_start = time.perf_counter()
    for k in range(1, iterations + 1):
        t_it = time.perf_counter()
        if momentum:
            z = s + ((k - 2) / (k + 1)) * (s - s_prev)
        else:
            z = s
        w = z - alpha * (x.conj().T @ (x @ z - y))
        s_prev, s = s, soft_threshold(w, level)
        report.iteration_times.append(time.perf_counter() - t_it)
        xs = x @ s
        r = y - xs
        fitv = float(np.vdot(r, r).real)
        obj = 0.5 * fitv + gamma * float(np.sum(np.abs(s)))
        report.entries.append(TraceEntry(k, "s", obj, fitv, nmse(xs, y),
                                         1e3 * (time.perf_counter() - t_start)))
        report.train_nmse_trace.append(report.entries[-1].nmse)
    report.wall_time = time.perf_counter() - t_start
    return GmpModel(s.reshape(design.dims, order="F")), report


def fista_lasso(design: DesignSet, gamma: float, iterations: int, seed: int = 0,
                return_report: bool = False):
    """Accelerated proximal gradient for the l1-penalized GMP fit.

    Step ``1/||X||_2^2``; momentum ``(k-2)/(k+1)`` with ``s_0 = s_-1 = 0``.
    The threshold is applied to the gradient-step point.
    """
    model, report = _proximal(design, gamma, iterations, True, seed)
    return (model, report) if return_report else model


def pgd_lasso(design: DesignSet, gamma: float, iterations: int, seed: int = 0,
              return_report: bool = False):
    model, report = _proximal(design, gamma, iterations, False, seed)
    return (model, report) if return_report else model


# ---------------------------------------------------------------------------
# ALS
# ---------------------------------------------------------------------------
#
# Every block update is a linear LS problem in the block's entries.  The
# system builders below return a tensor of shape (N, *block.shape); its
# first-index-fastest unfolding is the design matrix for vec(block).


def _cp_system(block, h, m, st):
    a, b, c = st["a"], st["b"], st["c"]
    if block == "a":
        u = np.einsum("njp,jr,pr->nr", m, b, c, optimize=True)
        return h[:, :, None] * u[:, None, :]
    if block == "b":
        return (h @ a)[:, None, :] * (m @ c)
    return (h @ a)[:, None, :] * np.einsum("njp,jr->npr", m, b, optimize=True)


def _tt_system(block, h, m, st):
    a, bcore, c = st["a"], st["bcore"], st["c"]
    n, m2, _ = m.shape
    r1, _, r2 = bcore.shape
    if block == "a":
        mc = m @ c.T
        u = mc.reshape(n, m2 * r2) @ bcore.reshape(r1, m2 * r2).T
        return h[:, :, None] * u[:, None, :]
    ha = h @ a
    if block == "bcore":
        return ha[:, :, None, None] * (m @ c.T)[:, None, :, :]
    w = (ha @ bcore.reshape(r1, m2 * r2)).reshape(n, m2, r2)
    return np.matmul(w.transpose(0, 2, 1), m)


def _tucker_system(block, h, m, st):
    g, a, b, c = st["g"], st["a"], st["b"], st["c"]
    n = m.shape[0]
    r1, r2, r3 = g.shape
    if block in ("g", "a"):
        e = np.matmul(b.T, m @ c)  # (N, R2, R3)
        if block == "g":
            return (h @ a)[:, :, None, None] * e[:, None, :, :]
        u = e.reshape(n, r2 * r3) @ g.reshape(r1, r2 * r3).T
        return h[:, :, None] * u[:, None, :]
    t = ((h @ a) @ g.reshape(r1, r2 * r3)).reshape(n, r2, r3)
    if block == "b":
        return np.matmul(m @ c, t.transpose(0, 2, 1))
    mb = np.matmul(b.T, m)  # (N, R2, P)
    return np.matmul(mb.transpose(0, 2, 1), t)


_SYSTEMS = {"cp": _cp_system, "tt": _tt_system, "tucker": _tucker_system}


def _block_shapes(kind, dims, ranks):
    m1, m2, p = dims
    if kind == "cp":
        (r,) = ranks
        return {"a": (m1, r), "b": (m2, r), "c": (p, r)}
    if kind == "tt":
        r1, r2 = ranks
        return {"a": (m1, r1), "bcore": (r1, m2, r2), "c": (r2, p)}
    r1, r2, r3 = ranks
    return {"g": (r1, r2, r3), "a": (m1, r1), "b": (m2, r2), "c": (p, r3)}


def _check_ranks(kind, ranks):
    if kind not in _SYSTEMS:
        raise ValueError(f"unknown tensor model kind {kind!r}")
    if isinstance(ranks, (int, np.integer)):
        ranks = (int(ranks),)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != _RANK_COUNT[kind] or min(ranks) < 1:
        raise ValueError(f"{kind} needs {_RANK_COUNT[kind]} positive rank(s), got {ranks}")
    return ranks


def random_init(kind: str, dims, ranks, seed: int = 0, scale: float = 0.1) -> Model:
    """Complex standard Gaussian factors times ``scale``."""
    ranks = _check_ranks(kind, ranks)
    rng = component_rng(seed, "init")
    arrays = {}
    for name, shape in _block_shapes(kind, tuple(dims), ranks).items():
        arrays[name] = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return _MODEL_CLASSES[kind](**arrays)


def _als(kind: str, design: DesignSet, ranks, cfg: SolverConfig, init: Model | None) -> tuple[Model, FitReport]:
    ranks = _check_ranks(kind, ranks)
    if init is None:
        init = random_init(kind, design.dims, ranks, cfg.seed, cfg.init_scale)
    elif init.kind != kind or tuple(init.dims) != tuple(design.dims) or tuple(init.ranks) != ranks:
        raise ValueError(f"initial model ({init.kind}, dims {init.dims}, ranks {init.ranks}) "
                         f"does not match {kind}, dims {design.dims}, ranks {ranks}")
    st = {k: v.copy() for k, v in init.arrays().items()}
    system = _SYSTEMS[kind]
    h, m, y = design.h, design.m, design.y
    n = design.n
    y_norm2 = float(np.vdot(y, y).real)
    report = FitReport(kind)
    t_start = time.perf_counter()
    for it in range(1, int(cfg.iterations) + 1):
        t_it = time.perf_counter()
        for block in BLOCKS[kind]:
            d = system(block, h, m, st).reshape(n, -1, order="F")
            x, deficient, res = solve_ridge(d, y, cfg.gamma)
            if deficient and not report.rank_deficient:
                warnings.warn(f"{kind} ALS: rank-deficient {block!r} subproblem; using minimum-norm solve",
                              RankDeficientWarning, stacklevel=3)
            report.rank_deficient |= deficient
            report.max_normal_residual = max(report.max_normal_residual, res)
            st[block] = x.reshape(st[block].shape, order="F")
            if cfg.record_objective:
                r = y - d @ x
                fitv = float(np.vdot(r, r).real)
                penalty = cfg.gamma * sum(float(np.vdot(v, v).real) for v in st.values())
                err = 10.0 * math.log10(max(fitv / y_norm2, 1e-30)) if y_norm2 > 0 else 0.0
                report.entries.append(TraceEntry(it, block, fitv + penalty, fitv, max(err, -300.0),
                                                 1e3 * (time.perf_counter() - t_start)))
        report.iteration_times.append(time.perf_counter() - t_it)
        if cfg.record_objective:
            report.train_nmse_trace.append(report.entries[-1].nmse)
    report.wall_time = time.perf_counter() - t_start
    return _MODEL_CLASSES[kind](**st), report


def als_cp(design: DesignSet, rank: int, cfg: SolverConfig = SolverConfig(), init: CpModel | None = None):
    return _als("cp", design, rank, cfg, init)


def als_tt(design: DesignSet, ranks, cfg: SolverConfig = SolverConfig(), init: TtModel | None = None):
    return _als("tt", design, ranks, cfg, init)


def als_tucker(design: DesignSet, ranks, cfg: SolverConfig = SolverConfig(), init: TuckerModel | None = None):
    return _als("tucker", design, ranks, cfg, init)


def als(kind: str, design: DesignSet, ranks, cfg: SolverConfig = SolverConfig(), init: Model | None = None):
    return _als(kind, design, ranks, cfg, init)


# ---------------------------------------------------------------------------
# RP-ALS
# ---------------------------------------------------------------------------


def project_model(model: Model, proj: ProjectionPair) -> Model:
    """Coordinates of ``model`` in the projected envelope space."""
    u2, u3 = proj.u2, proj.u3
    if isinstance(model, CpModel):
        return CpModel(model.a, u2.T @ model.b, u3.T @ model.c)
    if isinstance(model, TtModel):
        return TtModel(model.a, mode_product(model.bcore, 1, u2.T), model.c @ u3)
    if isinstance(model, TuckerModel):
        return TuckerModel(model.g, model.a, u2.T @ model.b, u3.T @ model.c)
    raise TypeError(f"cannot project a {type(model).__name__}")


def lift_model(model: Model, proj: ProjectionPair) -> Model:
    """Back-substitute projected factors into the original dimensions."""
    u2, u3 = proj.u2, proj.u3
    if isinstance(model, CpModel):
        return CpModel(model.a, u2 @ model.b, u3 @ model.c)
    if isinstance(model, TtModel):
        return TtModel(model.a, mode_product(model.bcore, 1, u2), model.c @ u3.T)
    if isinstance(model, TuckerModel):
        return TuckerModel(model.g, model.a, u2 @ model.b, u3 @ model.c)
    raise TypeError(f"cannot lift a {type(model).__name__}")


def rp_als(design: DesignSet, kind: str, ranks, proj, cfg: SolverConfig = SolverConfig(),
           init: Model | None = None, projection: ProjectionPair | None = None):
    """ALS on the envelope tensor projected to ``proj = (M2~, P~)``.

    ``init`` (original dims) is projected before use.  A precomputed
    ``projection`` skips the sketch.  Returns ``(model, report, projection)``
    with the model in the original dimensions.
    """
    ranks = _check_ranks(kind, ranks)
    if projection is None:
        projection = project_modes_23(design.m, tuple(proj), oversample=cfg.oversample,
                                      power=cfg.power, seed=component_int(cfg.seed, "sketch"))
    elif projection.target != tuple(proj):
        raise ValueError(f"projection has target {projection.target}, expected {tuple(proj)}")
    small = design.with_envelope(projection.core)
    if init is not None:
        init = project_model(init, projection)
    model, report = _als(kind, small, ranks, cfg, init)
    return lift_model(model, projection), report, projection


# ---------------------------------------------------------------------------
# error bound for the projected problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    holds: bool
    attained: float
    star_projected: float
    star_residual: float
    projection_error: float
    weight: float


def _bound_weight(model: Model, ha: np.ndarray) -> float:
    amax = np.max(np.abs(ha), axis=0)
    if isinstance(model, CpModel):
        return float(np.sum(amax * np.linalg.norm(model.b, axis=0) * np.linalg.norm(model.c, axis=0)))
    if isinstance(model, TtModel):
        bn = np.linalg.norm(model.bcore, axis=1)  # (R1, R2)
        cn = np.linalg.norm(model.c, axis=1)  # (R2,)
        return float(np.sum(amax[:, None] * bn * cn[None, :]))
    if isinstance(model, TuckerModel):
        w = np.einsum("abc,a,b,c->", np.abs(model.g), amax,
                      np.linalg.norm(model.b, axis=0), np.linalg.norm(model.c, axis=0))
        return float(w)
    raise TypeError(f"no projection bound for {type(model).__name__}")


def check_projection_bound(kind: str, design: DesignSet, proj: ProjectionPair, star_model: Model,
                           projected_optimum_value: float, rel_eps: float = 1e-8) -> BoundReport:
    """Compare the projected optimum with the unprojected residual plus the
    envelope truncation penalty.

    The projected minimum is at most both the value attained by the solver
    and the projected residual of ``star_model`` itself, so the smaller of
    the two is the tightest available stand-in for it.
    """
    if star_model.kind != kind:
        raise ValueError(f"star model is {star_model.kind}, expected {kind}")
    h, m, y = design.h, design.m, design.y
    star_res = float(np.linalg.norm(y - predict_factors(star_model, h, m)))
    star_proj = float(np.linalg.norm(y - predict_factors(project_model(star_model, proj), h, proj.core)))
    lhs = min(float(projected_optimum_value), star_proj)
    err = proj.residual_norm(m)
    weight = _bound_weight(star_model, h @ star_model.a)
    rhs = star_res + err * weight
    return BoundReport(lhs=lhs, rhs=rhs, holds=lhs <= rhs + rel_eps * rhs, attained=float(projected_optimum_value),
                       star_projected=star_proj, star_residual=star_res, projection_error=err, weight=weight)
