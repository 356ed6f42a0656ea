"""NMSE, sparsity and the model comparison table."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

NMSE_FLOOR_DB = -300.0


def nmse(y_model, y_test) -> float:
    """Normalized mean square error in dB, floored at -300 dB."""
    y_model = np.asarray(y_model)
    y_test = np.asarray(y_test)
    if y_model.shape != y_test.shape:
        raise ValueError(f"length mismatch: {y_model.shape} vs {y_test.shape}")
    ref = float(np.vdot(y_test, y_test).real)
    if ref == 0.0:
        raise ValueError("test signal has zero norm")
    diff = y_model - y_test
    err = float(np.vdot(diff, diff).real)
    if err == 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * math.log10(err / ref), NMSE_FLOOR_DB)


def sparsity(model, tol: float = 0.0) -> tuple[int, float]:
    """Number and fraction of coefficients with modulus above ``tol``."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    s = np.asarray(model.s)
    nz = int(np.count_nonzero(np.abs(s) > tol))
    return nz, nz / s.size


def median_time(fn, repeats: int = 5) -> float:
    times = []
    for _ in range(max(int(repeats), 1)):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


@dataclass
class EvalReport:
    model_kind: str
    dims: tuple
    ranks: tuple
    nmse_db: float
    num_params: int
    flops: int
    train_time_s: float = float("nan")
    simulate_time_s: float = float("nan")
    label: str = ""

    def row(self, timings: bool = True) -> dict:
        d = asdict(self)
        d["dims"] = "x".join(str(v) for v in self.dims)
        d["ranks"] = "x".join(str(v) for v in self.ranks)
        if not timings:
            d.pop("train_time_s")
            d.pop("simulate_time_s")
        return d


def reports_to_csv(reports, timings: bool = True) -> str:
    rows = [r.row(timings) for r in reports]
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def reports_to_json(reports, config: dict | None = None, timings: bool = True) -> str:
    doc = {"rows": [r.row(timings) for r in reports]}
    if config is not None:
        doc["config"] = config
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def evaluate_model(model, x, y, t0: int, n: int, repeats: int = 5, label: str = "",
                   train_time_s: float = float("nan")) -> EvalReport:
    """Simulate ``model`` on ``x`` over the test window and score it against ``y``."""
    from .models import num_flops, num_params, simulate

    y_model = simulate(model, x, t0, n)
    sim_t = median_time(lambda: simulate(model, x, t0, n), repeats) if repeats > 0 else float("nan")
    nz = num_params(model)
    if model.kind == "gmp":
        nz = sparsity(model)[0]
    return EvalReport(model_kind=model.kind, dims=tuple(model.dims), ranks=tuple(model.ranks),
                      nmse_db=nmse(y_model, np.asarray(y)[t0:t0 + n]), num_params=nz,
                      flops=num_flops(model), train_time_s=train_time_s, simulate_time_s=sim_t,
                      label=label or model.kind)


@dataclass(frozen=True)
class ModelSpec:
    """One row of a comparison: ``kind`` in gmp-ls, gmp-lasso, cp, tt, tucker."""

    kind: str
    dims: tuple
    ranks: tuple = ()
    gamma: float = 1e-6
    iterations: int = 10
    rp: tuple | None = None

    @property
    def label(self) -> str:
        base = {"gmp-ls": "GMP(LS)", "gmp-lasso": "GMP(LASSO)"}.get(self.kind, self.kind.upper())
        if self.ranks:
            base += "(" + ",".join(str(r) for r in self.ranks) + ")"
        if self.rp:
            base += " RP" + "(" + ",".join(str(r) for r in self.rp) + ")"
        return base


def fit_spec(spec: ModelSpec, design, seed: int = 0):
    """Train one configured model; returns ``(model, FitReport or None)``."""
    from .solvers import SolverConfig, als, fista_lasso, ridge_ls, rp_als

    if spec.kind == "gmp-ls":
        return ridge_ls(design, spec.gamma), None
    if spec.kind == "gmp-lasso":
        return fista_lasso(design, spec.gamma, spec.iterations, seed=seed, return_report=True)
    cfg = SolverConfig(gamma=spec.gamma, iterations=spec.iterations, seed=seed)
    if spec.rp:
        model, report, _ = rp_als(design, spec.kind, spec.ranks, spec.rp, cfg)
        return model, report
    return als(spec.kind, design, spec.ranks, cfg)


def compare_models(specs, x, y, train: tuple[int, int], test: tuple[int, int], seed: int = 0,
                   repeats: int = 5) -> list[EvalReport]:
    """Train and score every spec on shared data.

    Train/simulate times are medians over ``repeats`` runs.
    """
    from .design import build_design

    reports = []
    designs = {}
    for spec in specs:
        dims = tuple(spec.dims)
        if dims not in designs:
            designs[dims] = build_design(x, y, train[0], train[1], *dims)
        d = designs[dims]
        model, _ = fit_spec(spec, d, seed)
        train_t = median_time(lambda: fit_spec(spec, d, seed), repeats) if repeats > 0 else float("nan")
        reports.append(evaluate_model(model, x, y, test[0], test[1], repeats, spec.label, train_t))
    return reports


def format_table(reports) -> str:
    head = f"{'model':<22}{'dims':>10}{'NMSE (dB)':>12}{'params':>8}{'FLOPs':>8}{'train (s)':>12}{'sim (s)':>10}"
    lines = [head, "-" * len(head)]
    for r in reports:
        lines.append(f"{r.label:<22}{'x'.join(map(str, r.dims)):>10}{r.nmse_db:>12.4f}{r.num_params:>8d}"
                     f"{r.flops:>8d}{r.train_time_s:>12.4f}{r.simulate_time_s:>10.5f}")
    return "\n".join(lines)
