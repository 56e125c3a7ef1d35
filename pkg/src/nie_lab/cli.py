"""Command-line experiment runner: dataset | scan | train | genbound | toy.

Settings come from built-in defaults, then an optional JSON ``--config`` file,
then explicit flags. Every JSON output embeds the resolved configuration; the
only time-dependent value is ``metadata.created``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import NoiseSetting, build_circuit
from .genbound import argmin_cells, bound_cell
from .grids import nonzero_levels, parse_grid
from .nie import MIN_NONZERO_LEVELS, SpectrumScan, estimate_p_star
from .noise import canonical_kind
from .oracle import toy_gamma_star, toy_multi_eigvals, toy_single_qfi
from .qfim import compute_qfim
from .report import plot_bound, plot_ibar, plot_mse, plot_ratio_map, plot_toy, write_csv, write_json
from .train import (
    DATASET_KINDS,
    STREAM_NIE,
    Dataset,
    TrainConfig,
    estimate_p_star_mse,
    init_params,
    load_csv_dataset,
    make_dataset,
    read_dataset_csv,
    train_run,
    write_dataset_csv,
)

log = logging.getLogger("nie_lab")

EXIT_OK, EXIT_FAILURES, EXIT_USAGE = 0, 1, 2


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("NIE_LAB_WORKERS", "1")))
    except ValueError:
        return 1


COMMON = {"out": "results", "workers": None, "plots": True}
MODEL = {
    "circuit": "hea", "layers": 4, "encoding_scale": None, "entangler": "chain",
    "noise": "dp", "grid": "sin", "dataset": "sinusoidal", "seed": 0, "inputs": None,
    "feature_cols": None, "label_col": None, "train_count": None,
}
DEFAULTS = {
    "dataset": {**COMMON, "kind": "sinusoidal", "seed": 0, "n_samples": None, "n_features": 1},
    "scan": {**COMMON, **MODEL, "seeds": 5, "step": 1e-4},
    "train": {**COMMON, **MODEL, "seeds": 10, "epochs": 300, "lr": 0.01, "beta1": 0.9, "beta2": 0.999,
              "engine": "density"},
    "genbound": {**COMMON, **MODEL, "seeds": 5, "delta": 0.1, "step": 1e-4},
    "toy": {**COMMON, "mode": "both", "delta_E": "0", "delta_ell": 1.0, "t": 1.0, "gamma_max": None,
            "n_gamma": 201, "multi_delta_E": "1,0"},
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--config", help="JSON file with settings (flags override it)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (default: $NIE_LAB_WORKERS or 1)")
    p.add_argument("--plots", dest="plots", action="store_true", help="render PNG figures (default)")
    p.add_argument("--no-plots", dest="plots", action="store_false", help="skip figures")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_model(p, seeds_help):
    p.add_argument("--circuit", choices=["hea", "ising"])
    p.add_argument("--layers", type=int)
    p.add_argument("--encoding-scale", type=float, dest="encoding_scale")
    p.add_argument("--entangler", choices=["chain", "ring"], help="HEA CNOT pattern (default chain)")
    p.add_argument("--noise", help="dp | pd | ad (or full channel name)")
    p.add_argument("--grid", help="sin | diab | custom:p1,p2,...")
    p.add_argument("--seeds", type=int, help=seeds_help)
    p.add_argument("--dataset", help=f"generator kind {DATASET_KINDS} or a CSV path")
    p.add_argument("--seed", type=int, help="dataset seed")
    p.add_argument("--inputs", type=int, help="use only the first N training inputs")
    p.add_argument("--feature-cols", dest="feature_cols", help="comma-separated feature columns of a raw CSV")
    p.add_argument("--label-col", dest="label_col", help="label column of a raw CSV")
    p.add_argument("--train-count", dest="train_count", type=int, help="training rows of a raw CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nie-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nie-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("dataset", help="generate a dataset CSV", **kw)
    _add_common(p)
    p.add_argument("--kind", choices=list(DATASET_KINDS))
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int, help="sample count (uniform/gaussian)")
    p.add_argument("--n-features", dest="n_features", type=int, help="feature count (uniform/gaussian)")

    p = sub.add_parser("scan", help="QFIM spectra over a noise grid and the NIE estimate", **kw)
    _add_common(p)
    _add_model(p, "parameter vectors per input")
    p.add_argument("--step", type=float, help="finite-difference step")

    p = sub.add_parser("train", help="train over noise levels and seeds", **kw)
    _add_common(p)
    _add_model(p, "training initializations")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--engine", choices=["density", "statevector"])

    p = sub.add_parser("genbound", help="noise-dependent bound term B(p) over a grid", **kw)
    _add_common(p)
    _add_model(p, "parameter vectors per input")
    p.add_argument("--delta", type=float, help="confidence parameter")
    p.add_argument("--step", type=float, help="finite-difference step")

    p = sub.add_parser("toy", help="closed-form two-level model sweeps", **kw)
    _add_common(p)
    p.add_argument("--mode", choices=["single", "multi", "both"])
    p.add_argument("--delta-E", dest="delta_E", help="energy gap of the single-parameter model")
    p.add_argument("--multi-delta-E", dest="multi_delta_E", help="comma-separated gaps of the multi model")
    p.add_argument("--delta-ell", dest="delta_ell", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--gamma-max", dest="gamma_max", type=float)
    p.add_argument("--n-gamma", dest="n_gamma", type=int)
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "verbose")}
    if getattr(ns, "config", None):
        data = json.loads(Path(ns.config).read_text())
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise ValueError(f"unknown config keys for {command}: {unknown}")
        cfg.update(data)
    cfg.update(given)
    if cfg.get("workers") is None:
        cfg["workers"] = _default_workers()
    if "noise" in cfg:
        cfg["noise"] = canonical_kind(cfg["noise"])
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _metadata() -> dict:
    return {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "tool": "nie-lab", "version": __version__}


def _out(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec(cfg):
    return build_circuit(cfg["circuit"], cfg["layers"], cfg["encoding_scale"], cfg["entangler"])


def load_dataset(cfg) -> Dataset:
    src = cfg["dataset"]
    if src in DATASET_KINDS:
        kw = {}
        if src in ("uniform", "gaussian") and cfg.get("circuit") == "ising":
            kw["n_features"] = 2
        return make_dataset(src, cfg["seed"], **kw)
    path = Path(src)
    if cfg.get("feature_cols"):
        if not cfg.get("label_col") or not cfg.get("train_count"):
            raise ValueError("a raw CSV needs --feature-cols, --label-col and --train-count")
        cols = [c.strip() for c in str(cfg["feature_cols"]).split(",")]
        return load_csv_dataset(path, cols, cfg["label_col"], int(cfg["train_count"]), cfg["seed"])
    return read_dataset_csv(path)


def _inputs(cfg, ds: Dataset) -> np.ndarray:
    xs = ds.x_train
    if cfg.get("inputs") is not None:
        if cfg["inputs"] < 1:
            raise ValueError("--inputs must be >= 1")
        xs = xs[: cfg["inputs"]]
    return xs


def _call(job):
    fn, args = job
    try:
        return True, fn(*args)
    except Exception as exc:  # isolated per cell
        return False, f"{type(exc).__name__}: {exc}"


def run_jobs(fn, arg_list, workers: int) -> list:
    """Evaluate ``fn(*args)`` per job; results in submission order, each
    (ok, value_or_error)."""
    jobs = [(fn, a) for a in arg_list]
    if workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, jobs))


def _report_failures(results, labels) -> int:
    n = 0
    for (ok, val), lab in zip(results, labels):
        if not ok:
            n += 1
            log.error("cell %s failed: %s", lab, val)
    return n


# ---------------------------------------------------------------------------
# commands


def cmd_dataset(cfg) -> int:
    out = _out(cfg)
    kw = {}
    if cfg["kind"] in ("uniform", "gaussian"):
        kw["n_features"] = cfg["n_features"]
        if cfg.get("n_samples"):
            kw["m_total"] = cfg["n_samples"]
    elif cfg.get("n_samples"):
        if cfg["kind"] != "sinusoidal":
            raise ValueError("--n-samples applies to sinusoidal, uniform and gaussian")
        kw["m_total"] = cfg["n_samples"]
    ds = make_dataset(cfg["kind"], cfg["seed"], **kw)
    path = out / "dataset.csv"
    write_dataset_csv(ds, path)
    write_json(out / "dataset.json", {
        "config": cfg,
        "result": {"file": path.name, "rows": len(ds.labels), "train_rows": len(ds.train_idx),
                   "test_rows": len(ds.test_idx), "dataset": ds.meta},
        "metadata": _metadata(),
    })
    log.info("wrote %s (%d rows, %d train)", path, len(ds.labels), len(ds.train_idx))
    return EXIT_OK


def _qfim_eigs(spec, x, theta, kind, p, step):
    return compute_qfim(spec, x, theta, NoiseSetting(kind, p), h=step).eigenvalues


def cmd_scan(cfg) -> int:
    grid = parse_grid(cfg["grid"])
    levels = nonzero_levels(grid)
    if len(levels) < MIN_NONZERO_LEVELS:
        raise ValueError(f"scan needs at least {MIN_NONZERO_LEVELS} nonzero noise levels, got {len(levels)}")
    if cfg["seeds"] < 1:
        raise ValueError("--seeds must be >= 1")
    out = _out(cfg)
    spec = _spec(cfg)
    ds = load_dataset(cfg)
    xs = _inputs(cfg, ds)
    thetas = [init_params(spec.n_params, s, STREAM_NIE) for s in range(cfg["seeds"])]
    cells = [(i, s, p) for i in range(len(xs)) for s in range(len(thetas)) for p in (0.0,) + levels]
    args = [(spec, xs[i], thetas[s], cfg["noise"], p, cfg["step"]) for i, s, p in cells]
    results = run_jobs(_qfim_eigs, args, cfg["workers"])
    failures = _report_failures(results, cells)

    scan = SpectrumScan(levels)
    bad_runs = {(i, s) for (i, s, _), (ok, _) in zip(cells, results) if not ok}
    rows = []
    for (i, s, p), (ok, lam) in zip(cells, results):
        if not ok or (i, s) in bad_runs:
            continue
        scan.add(i, s, p, lam)
        rows += [(spec.label, cfg["layers"], cfg["noise"], p, i, s, r + 1, v) for r, v in enumerate(lam)]
    write_csv(out / "spectrum.csv",
              ["circuit", "L", "noise_kind", "p", "input_id", "seed_id", "rank_r", "lambda_r"], rows)
    write_json(out / "spectrum.json", {
        "config": cfg,
        "result": {"grid": list(levels), "reference_p": 0.0, "n_inputs": len(xs), "n_seeds": len(thetas),
                   "n_params": spec.n_params, "inputs": xs.tolist(), "excluded_runs": sorted(bad_runs)},
        "metadata": _metadata(),
    })
    result = {"status": "no runs", "failures": failures}
    if scan.runs():
        rep = estimate_p_star(scan)
        result = {**rep.summary(), "p_star_samples": rep.p_star_samples, "failures": failures}
        write_csv(out / "ibar.csv", ["p", "I_bar_mean", "I_bar_std"],
                  zip(levels, rep.I_bar_mean, rep.I_bar_std))
        if cfg["plots"]:
            title = f"{spec.label} {cfg['noise']}"
            if rep.R_max > 0:
                plot_ibar(levels, rep.I_bar_mean, rep.I_bar_std, out / "ibar.png", rep.p_star, title)
            runs = scan.runs()
            ratios = np.mean([[rep.I_table[(i, s, p)] for p in levels] for i, s in runs], axis=0).T
            plot_ratio_map(levels, ratios, out / "ratio_map.png", title)
    write_json(out / "nie_report.json", {"config": cfg, "result": result, "metadata": _metadata()})
    log.info("scan done: %s", {k: result.get(k) for k in ("status", "p_star", "p_star_std", "R_max")})
    return EXIT_FAILURES if failures else EXIT_OK


def _train_cell(tc: TrainConfig, ds: Dataset):
    h = train_run(tc, ds)
    return h.train_mse, h.test_mse


def cmd_train(cfg) -> int:
    grid = parse_grid(cfg["grid"])
    out = _out(cfg)
    ds = load_dataset(cfg)
    base = dict(circuit=cfg["circuit"], layers=cfg["layers"], noise_kind=cfg["noise"], epochs=cfg["epochs"],
                lr=cfg["lr"], beta1=cfg["beta1"], beta2=cfg["beta2"], engine=cfg["engine"],
                encoding_scale=cfg["encoding_scale"], entangler=cfg["entangler"])
    cells = [(p, s) for p in grid for s in range(cfg["seeds"])]
    args = [(TrainConfig(p=p, seed=s, **base), ds) for p, s in cells]
    results = run_jobs(_train_cell, args, cfg["workers"])
    failures = _report_failures(results, cells)
    finals, rows = {}, []
    for k, ((p, s), (ok, val)) in enumerate(zip(cells, results)):
        if not ok:
            continue
        tr, te = val
        write_csv(out / "histories" / f"p{grid.index(p):02d}_seed{s}.csv", ["epoch", "train_mse", "test_mse"],
                  ((e, a, b) for e, (a, b) in enumerate(zip(tr, te))))
        finals[(p, s)] = te[-1]
        rows.append((p, s, tr[-1], te[-1], te[-1] - tr[-1]))
    write_csv(out / "train_runs.csv", ["p", "seed", "final_train_mse", "final_test_mse", "gen_gap"], rows)

    per_p = []
    for p in grid:
        sel = [r for r in rows if r[0] == p]
        if sel:
            a = np.array(sel)
            per_p.append({"p": p, "train_mean": a[:, 2].mean(), "test_mean": a[:, 3].mean(),
                          "test_std": a[:, 3].std(), "gap_mean": a[:, 4].mean(), "n": len(sel)})
    result = {"per_p": per_p, "failures": failures, "p_star": None, "p_star_std": None}
    status = EXIT_FAILURES if failures else EXIT_OK
    if len(grid) == 1 and grid[0] == 0.0:
        result["p_star_status"] = "baseline only: grid holds no nonzero level"
    else:
        try:
            p_star, p_std, picks = estimate_p_star_mse(finals)
            result.update(p_star=p_star, p_star_std=p_std, argmin_per_seed=picks, p_star_status="ok")
        except ValueError as exc:
            result["p_star_status"] = f"error: {exc}"
            status = EXIT_FAILURES
    write_json(out / "train_summary.json", {"config": cfg, "result": result, "metadata": _metadata()})
    if cfg["plots"] and per_p:
        plot_mse([d["p"] for d in per_p], [d["train_mean"] for d in per_p], [d["test_mean"] for d in per_p],
                 [d["test_std"] for d in per_p], out / "mse.png", result["p_star"],
                 f"{cfg['circuit']}-L{cfg['layers']} {cfg['noise']}")
    log.info("train done: p*=%s +- %s", result["p_star"], result["p_star_std"])
    return status


def cmd_genbound(cfg) -> int:
    grid = parse_grid(cfg["grid"])
    out = _out(cfg)
    spec = _spec(cfg)
    ds = load_dataset(cfg)
    xs = _inputs(cfg, ds)
    thetas = [init_params(spec.n_params, s, STREAM_NIE) for s in range(cfg["seeds"])]
    m_train = len(ds.train_idx)
    args = [(spec, xs, thetas, NoiseSetting(cfg["noise"], p), m_train, cfg["delta"], cfg["step"]) for p in grid]
    results = run_jobs(bound_cell, args, cfg["workers"])
    failures = _report_failures(results, grid)
    cells = [val for ok, val in results if ok]
    scan = argmin_cells(cells)
    write_csv(out / "bound.csv",
              ["p", "d_eff_mean", "log_m", "L_f", "B", "computable_flag", "d_eff", "d_eff_std",
               "log_sqrt_det_mean", "log_sqrt_det_std", "full_bound", "reason"],
              [(c.p, c.d_eff_mean, c.log_m, c.L_f, c.B, c.computable, c.d_eff, c.d_eff_std,
                c.log_sqrt_det_mean, c.log_sqrt_det_std, c.bound, c.reason) for c in cells])
    result = {**scan.summary(), "M": m_train, "delta": cfg["delta"], "n_samples_per_p": len(xs) * len(thetas),
              "failures": failures}
    write_json(out / "bound.json", {"config": cfg, "result": result, "metadata": _metadata()})
    if cfg["plots"] and cells:
        plot_bound(cells, out / "bound.png", scan.argmin_p, f"{spec.label} {cfg['noise']}")
    log.info("genbound done: %s argmin=%s", scan.status, scan.argmin_p)
    return EXIT_FAILURES if failures else EXIT_OK


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def cmd_toy(cfg) -> int:
    out = _out(cfg)
    dl, t, n = float(cfg["delta_ell"]), float(cfg["t"]), int(cfg["n_gamma"])
    if n < 2:
        raise ValueError("--n-gamma must be >= 2")
    result = {}
    if cfg["mode"] in ("single", "both"):
        de = _floats(cfg["delta_E"])[0]
        g_star = toy_gamma_star(de, dl, t)
        g_max = cfg["gamma_max"] or (4.0 * g_star if g_star else 2.0)
        gammas = np.linspace(0.0, g_max, n)
        f = np.array([toy_single_qfi(de, dl, g, t) for g in gammas])
        write_csv(out / "toy_single.csv", ["gamma", "F"], zip(gammas, f))
        result["single"] = {"delta_E": de, "delta_ell": dl, "t": t, "gamma_star": g_star,
                            "gamma_star_status": "ok" if g_star is not None else "not achievable",
                            "grid_argmax_gamma": float(gammas[int(np.argmax(f))]), "F_at_zero": float(f[0])}
        if cfg["plots"]:
            plot_toy(gammas, {"F": f}, out / "toy_single.png", g_star, f"dE={de}, dl={dl}, t={t}")
    if cfg["mode"] in ("multi", "both"):
        des = _floats(cfg["multi_delta_E"])
        g_max = cfg["gamma_max"] or 0.1
        gammas = np.linspace(0.0, g_max, n)
        eig = [toy_multi_eigvals(des, dl, g, t) for g in gammas]
        write_csv(out / "toy_multi.csv", ["gamma", "lam_plus", "lam_minus", "lam_plus_exact", "lam_minus_exact"],
                  [(g, *e) for g, e in zip(gammas, eig)])
        result["multi"] = {"delta_E": des, "delta_ell": dl, "t": t}
        if cfg["plots"]:
            cols = {name: np.array([getattr(e, name) for e in eig])
                    for name in ("lam_plus", "lam_minus", "lam_plus_exact", "lam_minus_exact")}
            plot_toy(gammas, cols, out / "toy_multi.png", None, f"dE={des}")
    write_json(out / "toy.json", {"config": cfg, "result": result, "metadata": _metadata()})
    return EXIT_OK


COMMANDS = {"dataset": cmd_dataset, "scan": cmd_scan, "train": cmd_train, "genbound": cmd_genbound, "toy": cmd_toy}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(ns.command, ns)
        return COMMANDS[ns.command](cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"nie-lab {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
