"""Persistence (CSV, JSON with 17-significant-digit floats) and figures."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# ---------------------------------------------------------------------------
# files


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _json_text(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_text(str(k), indent, level + 1)}: {_json_text(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_json_text(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _json_text(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text; floats carry 17 significant digits, non-finite floats become null."""
    return _json_text(obj, indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


# ---------------------------------------------------------------------------
# figures


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed metadata keeps repeated renders byte-identical
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata={"Software": None})
    _plt().close(fig)
    return path


def plot_ibar(grid, mean, std, path, p_star=None, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    g, m, s = np.asarray(grid), np.asarray(mean), np.asarray(std)
    ax.plot(g, m, marker="o", ms=3)
    ax.fill_between(g, m - s, m + s, alpha=0.25)
    ax.axhline(1.0, color="gray", lw=0.8, ls=":")
    if p_star is not None:
        ax.axvline(p_star, color="k", ls="--", lw=1, label=f"p* = {p_star:.2e}")
        ax.legend()
    ax.set_xscale("log")
    ax.set_xlabel("noise level p")
    ax.set_ylabel("mean importance ratio over leading ranks")
    ax.set_title(title)
    return _save(fig, path)


def plot_ratio_map(grid, ratios, path, title=""):
    """Mean log10 I_r(p) per rank (rows) and noise level (columns)."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    r = np.log10(np.maximum(np.asarray(ratios), 1e-12))
    im = ax.imshow(r, aspect="auto", origin="lower", cmap="coolwarm",
                   vmin=-max(1.0, np.abs(r).max()), vmax=max(1.0, np.abs(r).max()))
    ax.set_xticks(range(len(grid)))
    ax.set_xticklabels([f"{p:.0e}" for p in grid], rotation=90, fontsize=7)
    ax.set_xlabel("noise level p")
    ax.set_ylabel("eigenvalue rank (ascending)")
    fig.colorbar(im, ax=ax, label="log10 I_r(p)")
    ax.set_title(title)
    return _save(fig, path)


def plot_mse(ps, train_mean, test_mean, test_std, path, p_star=None, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.asarray(ps, dtype=float)
    xplot = np.where(x > 0, x, np.nan)
    ax.errorbar(np.arange(len(x)), test_mean, yerr=test_std, marker="o", label="test MSE")
    ax.plot(np.arange(len(x)), train_mean, marker="s", ls="--", label="train MSE")
    ax.set_xticks(np.arange(len(x)))
    ax.set_xticklabels([f"{p:.0e}" if p > 0 else "0" for p in x], rotation=90, fontsize=7)
    if p_star is not None and np.isfinite(xplot).any():
        ax.set_title(f"{title} p* = {p_star:.2e}".strip())
    else:
        ax.set_title(title)
    ax.set_xlabel("noise level p")
    ax.set_ylabel("final MSE")
    ax.legend()
    return _save(fig, path)


def plot_bound(cells, path, argmin=None, title=""):
    """Four panels: B(p), L_f, sqrt(det F) (log10 of the mean sample), d_eff."""
    plt = _plt()
    fig, axes = plt.subplots(4, 1, figsize=(6, 10), sharex=True)
    p = np.array([c.p for c in cells])
    comp = np.array([c.computable for c in cells])
    series = [
        ("B(p)", np.array([c.B for c in cells])),
        ("L_f", np.array([c.L_f for c in cells])),
        ("log10 sqrt(det F)", np.array([c.log_sqrt_det_mean for c in cells]) / np.log(10)),
        ("d_eff", np.array([c.d_eff_mean for c in cells])),
    ]
    for ax, (label, y) in zip(axes, series):
        ax.plot(p, y, marker="o", ms=3)
        if label == "log10 sqrt(det F)":
            s = np.array([c.log_sqrt_det_std for c in cells]) / np.log(10)
            ax.fill_between(p, y - s, y + s, alpha=0.25)
        if label == "d_eff":
            s = np.array([c.d_eff_std for c in cells])
            ax.fill_between(p, y - s, y + s, alpha=0.25)
        for pi, ok in zip(p, comp):
            if not ok:
                ax.axvspan(pi / 1.15, pi * 1.15, color="red", alpha=0.2, lw=0)
        if argmin is not None:
            ax.axvline(argmin, color="k", ls=":", lw=1)
        ax.set_ylabel(label)
        ax.set_xscale("log")
    axes[0].set_title(title)
    axes[-1].set_xlabel("noise level p")
    return _save(fig, path)


def plot_toy(gammas, columns: dict, path, marker=None, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in columns.items():
        ax.plot(gammas, y, label=label)
    if marker is not None:
        ax.axvline(marker, color="k", ls="--", lw=1, label=f"gamma* = {marker:.4g}")
    ax.set_xlabel("gamma")
    ax.legend()
    ax.set_title(title)
    return _save(fig, path)


__all__ = ["fmt", "write_csv", "write_json", "dumps", "plot_ibar", "plot_ratio_map", "plot_mse", "plot_bound", "plot_toy"]
