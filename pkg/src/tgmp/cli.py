"""Command-line driver: ``tgmp generate|train|evaluate|bench|export``.

Exit codes: 0 success, 2 configuration/argument error, 3 numeric failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import ConfigError, ExperimentConfig, ModelEntry, load_config, with_seed
from .design import build_design
from .metrics import (
    ModelSpec,
    compare_models,
    evaluate_model,
    fit_spec,
    format_table,
    nmse,
    reports_to_csv,
    reports_to_json,
    sparsity,
)
from .models import expand_to_gmp, load_model, num_params, save_model, simulate
from .seeds import COMPONENTS, component_int, component_rng
from .signals import am_am, ofdm_generate, read_signal, reference_pa_apply, write_signal

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
DATA_FORMAT = "tgmp-data/1"


class NumericFailure(RuntimeError):
    pass


class DataError(OSError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _ints(text: str, what: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated integers, got {text!r}", "<args>") from None
    if not vals or min(vals) < 1:
        raise ConfigError(f"{what} must be positive integers, got {text!r}", "<args>")
    return vals


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def _generate_signals(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    x = ofdm_generate(cfg.ofdm, rng=component_rng(cfg.seed, "ofdm"))
    y = reference_pa_apply(x, cfg.pa(), rng=component_rng(cfg.seed, "noise"))
    return x, y


def _load_data(path) -> tuple[np.ndarray, np.ndarray, dict]:
    path = Path(path)
    manifest_path = path / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise DataError(f"{path}: no manifest.json (run 'tgmp generate' first)") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: unreadable manifest ({exc})") from None
    if manifest.get("format") != DATA_FORMAT:
        raise DataError(f"{manifest_path}: unexpected format {manifest.get('format')!r}")
    try:
        x = read_signal(path / manifest["files"]["x"]["name"])
        y = read_signal(path / manifest["files"]["y"]["name"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: cannot read signals ({exc})") from None
    if x.size != y.size:
        raise DataError(f"{path}: x and y lengths differ ({x.size} vs {y.size})")
    return x, y, manifest


def _window(spec: str | None, cfg: ExperimentConfig, default: str) -> tuple[int, int]:
    spec = spec or default
    if spec == "train":
        return cfg.train.t0, cfg.train.n
    if spec == "test":
        return cfg.test.t0, cfg.test.n
    vals = spec.split(",")
    if len(vals) != 2:
        raise ConfigError(f"--window must be train, test or T0,N; got {spec!r}", "<args>")
    try:
        t0, n = int(vals[0]), int(vals[1])
    except ValueError:
        raise ConfigError(f"--window must be train, test or T0,N; got {spec!r}", "<args>") from None
    return t0, n


def _check_finite(model) -> None:
    for name, arr in model.arrays().items():
        if not np.all(np.isfinite(arr)):
            raise NumericFailure(f"identified {model.kind} model has non-finite entries in {name!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x, y = _generate_signals(cfg)
    ext = ".csv" if args.signal_format == "csv" else ".tns"
    files = {}
    for name, sig in (("x", x), ("y", y)):
        p = out / f"{name}{ext}"
        write_signal(p, sig)
        files[name] = {"name": p.name, "samples": int(sig.size), "sha256": _sha256(p)}
    manifest = {
        "format": DATA_FORMAT,
        "version": __version__,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "component_seeds": {c: component_int(cfg.seed, c) for c in COMPONENTS},
        "backend": _kernels.backend(),
        "files": files,
    }
    _write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {x.size} samples to {out} (config {cfg.hash()[:12]})")
    return EXIT_OK


def _resolve_model(args, cfg: ExperimentConfig) -> ModelEntry:
    sel = args.model
    try:
        entry = cfg.model(sel)
    except KeyError:
        if sel not in ("gmp-ls", "gmp-lasso", "cp", "tt", "tucker"):
            known = ", ".join(m.name for m in cfg.models) or "none"
            raise ConfigError(f"--model {sel!r} is neither a model kind nor a configured model (configured: {known})",
                              "<args>") from None
        entry = ModelEntry(name=sel, kind=sel)
    kw = {}
    if args.dims:
        kw["dims"] = _ints(args.dims, "--dims")
        if len(kw["dims"]) != 3:
            raise ConfigError("--dims needs M1,M2,P", "<args>")
    if args.ranks:
        kw["ranks"] = _ints(args.ranks, "--ranks")
    if args.gamma is not None:
        if args.gamma < 0:
            raise ConfigError("--gamma must be >= 0", "<args>")
        kw["gamma"] = args.gamma
    if args.iters is not None:
        if args.iters < 1:
            raise ConfigError("--iters must be >= 1", "<args>")
        kw["iterations"] = args.iters
    if args.rp_als:
        kw["rp"] = True
    entry = replace(entry, **kw)
    need = {"gmp-ls": 0, "gmp-lasso": 0, "cp": 1, "tt": 2, "tucker": 3}[entry.kind]
    if len(entry.ranks) != need:
        raise ConfigError(f"{entry.kind} needs {need} rank(s) (use --ranks), got {entry.ranks}", "<args>")
    if entry.rp and need == 0:
        raise ConfigError("--rp-als applies only to cp, tt and tucker", "<args>")
    return entry


def cmd_train(args) -> int:
    cfg = _config(args)
    entry = _resolve_model(args, cfg)
    proj = _ints(args.proj, "--proj") if args.proj else (cfg.projection.m2, cfg.projection.p)
    if len(proj) != 2:
        raise ConfigError("--proj needs M2~,P~", "<args>")
    x, y, manifest = _load_data(args.data)
    t0, n = _window(args.window, cfg, "train")
    design = build_design(x, y, t0, n, *entry.dims)
    spec = ModelSpec(kind=entry.kind, dims=entry.dims, ranks=entry.ranks, gamma=entry.gamma,
                     iterations=entry.iterations, rp=proj if entry.rp else None)
    t = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model, report = fit_spec(spec, design, seed=cfg.seed)
    train_time = time.perf_counter() - t
    _check_finite(model)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)

    out = Path(args.out)
    name = args.name or entry.name
    save_model(out / f"{name}.json", model)
    fit_nmse = nmse(simulate(model, x, t0, n), y[t0:t0 + n])
    summary = {
        "name": name,
        "kind": entry.kind,
        "dims": list(entry.dims),
        "ranks": list(entry.ranks),
        "gamma": entry.gamma,
        "iterations": entry.iterations,
        "rp_als": list(proj) if entry.rp else None,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "data_config_hash": manifest.get("config_hash"),
        "train_window": [t0, n],
        "train_nmse_db": fit_nmse,
    }
    if args.format == "json":
        doc = dict(summary)
        if report is not None:
            doc["trace"] = [{"iteration": e.iteration, "block": e.block, "objective": e.objective,
                             "fit": e.fit, "nmse_db": e.nmse} for e in report.entries]
        _write_text(out / f"{name}.trace.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        _write_text(out / f"{name}.trace.csv", report.to_csv(timings=False) if report is not None
                    else "iteration,block,objective,fit,nmse_db\n")
        _write_text(out / f"{name}.summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    timing = {"train_time_s": train_time}
    if report is not None:
        timing["iteration_times_s"] = report.iteration_times
        _write_text(out / f"{name}.timing.csv", report.to_csv(timings=True))
    _write_text(out / f"{name}.timing.json", json.dumps(timing, indent=2) + "\n")
    print(f"{name}: {entry.kind} dims={entry.dims} ranks={entry.ranks} train NMSE {fit_nmse:.4f} dB "
          f"({train_time:.3f} s)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    try:
        model = load_model(args.model)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{args.model}: cannot read model ({exc})") from None
    x, y, _ = _load_data(args.data)
    t0, n = _window(args.window, cfg, "test")
    rep = evaluate_model(model, x, y, t0, n, repeats=args.repeats, label=Path(args.model).stem)
    if not np.isfinite(rep.nmse_db):
        raise NumericFailure(f"NMSE is not finite for {args.model}")
    out = Path(args.out)
    if args.format == "json":
        _write_text(out / "eval.json", reports_to_json([rep], timings=False))
    else:
        _write_text(out / "eval.csv", reports_to_csv([rep], timings=False))
    _write_text(out / "eval.timing.json", json.dumps({"simulate_time_s": rep.simulate_time_s}, indent=2) + "\n")
    print(format_table([rep]))
    return EXIT_OK


def _sweep_rows(sweep, design, x, y, test, seed):
    rows = []
    for v in sweep.values:
        if sweep.kind in ("gmp-ls", "gmp-lasso"):
            spec = ModelSpec(sweep.kind, sweep.dims, (), float(v), sweep.iterations)
        elif isinstance(v, int) and sweep.kind == "cp" and not sweep.ranks:
            spec = ModelSpec("cp", sweep.dims, (int(v),), sweep.gamma, sweep.iterations)
        else:
            spec = ModelSpec(sweep.kind, sweep.dims, sweep.ranks, float(v), sweep.iterations)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, _ = fit_spec(spec, design, seed)
        err = nmse(simulate(model, x, *test), y[test[0]:test[0] + test[1]])
        nz = sparsity(model)[0] if model.kind == "gmp" else num_params(model)
        rows.append((v, err, nz))
    return rows


def cmd_bench(args) -> int:
    cfg = _config(args)
    if args.data:
        x, y, _ = _load_data(args.data)
    else:
        x, y = _generate_signals(cfg)
    train = (cfg.train.t0, cfg.train.n)
    test = (cfg.test.t0, cfg.test.n)
    repeats = args.repeats if args.repeats is not None else cfg.repeats
    out = Path(args.out)
    specs = [ModelSpec(m.kind, m.dims, m.ranks, m.gamma, m.iterations,
                       (cfg.projection.m2, cfg.projection.p) if m.rp else None) for m in cfg.models]
    if specs:
        reports = compare_models(specs, x, y, train, test, seed=cfg.seed, repeats=repeats)
        for r in reports:
            if not np.isfinite(r.nmse_db):
                raise NumericFailure(f"{r.label}: NMSE is not finite")
        if args.format == "json":
            _write_text(out / "bench.json", reports_to_json(reports, cfg.to_dict()))
        else:
            _write_text(out / "bench.csv", reports_to_csv(reports))
        print(format_table(reports))
    for key, sweep, col in (("gamma_sweep", cfg.gamma_sweep, "gamma"), ("rank_sweep", cfg.rank_sweep, "rank")):
        if sweep is None:
            continue
        design = build_design(x, y, *train, *sweep.dims)
        rows = _sweep_rows(sweep, design, x, y, test, cfg.seed)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([col, "nmse_db", "nonzeros"])
        for v, err, nz in rows:
            w.writerow([repr(v), repr(err), nz])
        _write_text(out / f"{key}.csv", buf.getvalue())
        print(f"{key}: {len(rows)} points -> {out / (key + '.csv')}")
    if not specs and cfg.gamma_sweep is None and cfg.rank_sweep is None:
        raise ConfigError("nothing to benchmark: the config lists no models and no sweeps", args.config or "<config>")
    return EXIT_OK


def cmd_export(args) -> int:
    out = Path(args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.what == "amam":
        if not args.data:
            raise ConfigError("export amam needs --data", "<args>")
        x, y, _ = _load_data(args.data)
        p_in, gain = am_am(x, y, bins=args.bins)
        w.writerow(["input_power", "gain"])
        for a, b in zip(p_in, gain):
            w.writerow([repr(float(a)), repr(float(b))])
    elif args.what == "coeffs":
        if not args.model:
            raise ConfigError("export coeffs needs --model", "<args>")
        s = expand_to_gmp(load_model(args.model)).s
        w.writerow(["i", "j", "p", "re", "im"])
        for (i, j, p), v in np.ndenumerate(s):
            w.writerow([i, j, p, repr(float(v.real)), repr(float(v.imag))])
    else:
        if not (args.model and args.data):
            raise ConfigError("export prediction needs --model and --data", "<args>")
        cfg = _config(args)
        model = load_model(args.model)
        x, y, _ = _load_data(args.data)
        t0, n = _window(args.window, cfg, "test")
        ym = simulate(model, x, t0, n)
        w.writerow(["t", "y_re", "y_im", "model_re", "model_im"])
        for k in range(n):
            w.writerow([t0 + k, repr(float(y[t0 + k].real)), repr(float(y[t0 + k].imag)),
                        repr(float(ym[k].real)), repr(float(ym[k].imag))])
    if args.format == "json":
        rows = list(csv.reader(io.StringIO(buf.getvalue())))
        text = json.dumps({"columns": rows[0], "rows": rows[1:]}, indent=1) + "\n"
        target = out if out.suffix else out / f"{args.what}.json"
    else:
        text = buf.getvalue()
        target = out if out.suffix else out / f"{args.what}.csv"
    _write_text(target, text)
    print(f"wrote {target}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tgmp", description="Tensor-compressed GMP power-amplifier models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help="root seed (overrides the config)")
        sp.add_argument("--out", required=True, help=out_help)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    g = sub.add_parser("generate", help="synthesize input/output signals")
    common(g, "output directory")
    g.add_argument("--signal-format", choices=("tns", "csv"), default="tns")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="identify one model")
    common(t, "output directory for the model and its trace")
    t.add_argument("--data", required=True, help="directory written by 'generate'")
    t.add_argument("--model", required=True, help="configured model name or kind (gmp-ls, gmp-lasso, cp, tt, tucker)")
    t.add_argument("--name", help="output file stem (default: model name)")
    t.add_argument("--dims", help="M1,M2,P")
    t.add_argument("--rank", "--ranks", dest="ranks", help="rank(s), e.g. 3 or 2,2")
    t.add_argument("--gamma", type=float)
    t.add_argument("--iters", type=int)
    t.add_argument("--rp-als", action="store_true", help="use randomized-projection ALS")
    t.add_argument("--proj", help="projection ranks M2~,P~ (default from the config)")
    t.add_argument("--window", help="train, test or T0,N (default: train)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a model on a window")
    common(e, "output directory for the report")
    e.add_argument("--model", required=True, help="model file")
    e.add_argument("--data", required=True)
    e.add_argument("--window", help="train, test or T0,N (default: test)")
    e.add_argument("--repeats", type=int, default=5, help="timing repeats (median)")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="comparison table and sweeps")
    common(b, "output directory")
    b.add_argument("--data", help="signal directory (default: generate from the config)")
    b.add_argument("--repeats", type=int)
    b.set_defaults(func=cmd_bench)

    x = sub.add_parser("export", help="plot-ready CSV/JSON")
    common(x, "output file or directory")
    x.add_argument("--what", choices=("amam", "coeffs", "prediction"), required=True)
    x.add_argument("--model")
    x.add_argument("--data")
    x.add_argument("--window")
    x.add_argument("--bins", type=int, default=50)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
