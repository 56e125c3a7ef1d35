"""Importance ratios, equalization ranks and the best-equalization noise level.

Eigenvalues are always in ascending order; rank r = 1 is the smallest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

RATIO_FLOOR = 1e-10
MIN_NONZERO_LEVELS = 3

Run = tuple  # (input_id, seed_id)


def importance_ratio(lams_p, lams_p0) -> np.ndarray:
    """I_r = lam_r(p) / max(1e-10, lam_r(p0))."""
    a = np.asarray(lams_p, dtype=float)
    b = np.asarray(lams_p0, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"eigenvalue vectors differ in length: {a.shape} vs {b.shape}")
    return a / np.maximum(RATIO_FLOOR, b)


class RankResult(NamedTuple):
    R: int
    conforming: bool


def detect_R(ratios) -> RankResult:
    """Length of the leading run of ratios > 1.

    ``conforming`` is False when some later ratio exceeds 1 again, i.e. the
    pattern is not a clean threshold.
    """
    above = np.asarray(ratios, dtype=float) > 1.0
    r = int(np.argmin(above)) if not above.all() else above.size
    return RankResult(r, not bool(above[r:].any()))


@dataclass
class SpectrumScan:
    """Ascending eigenvalues per (input_id, seed_id, p); ``grid`` holds the
    nonzero noise levels in ascending order, the reference level is 0."""

    grid: tuple[float, ...]
    records: dict = field(default_factory=dict)

    def add(self, input_id, seed_id, p: float, eigenvalues) -> None:
        self.records[(input_id, seed_id, float(p))] = np.sort(np.asarray(eigenvalues, dtype=float))

    def runs(self) -> list[Run]:
        return sorted({(i, s) for (i, s, _) in self.records})

    def validate(self) -> None:
        grid = list(self.grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("noise grid must be strictly ascending")
        if any(p <= 0 for p in grid):
            raise ValueError("grid holds the nonzero levels; the reference p0 = 0 is implicit")
        if len(grid) < MIN_NONZERO_LEVELS:
            raise ValueError(f"need at least {MIN_NONZERO_LEVELS} nonzero noise levels, got {len(grid)}")
        sizes = {v.shape for v in self.records.values()}
        if len(sizes) > 1:
            raise ValueError(f"eigenvalue vectors of different lengths: {sorted(sizes)}")
        for run in self.runs():
            for p in [0.0] + grid:
                if (run[0], run[1], float(p)) not in self.records:
                    raise ValueError(f"missing spectrum for input {run[0]}, seed {run[1]}, p={p}")


@dataclass
class NieReport:
    grid: tuple[float, ...]
    I_table: dict
    R_of: dict
    nonconforming: list
    R_max_per_run: dict
    R_max: int
    p_star: float | None
    p_star_std: float | None
    p_star_samples: list
    I_bar_mean: np.ndarray
    I_bar_std: np.ndarray
    status: str
    extrapolated: bool = False

    @property
    def nonconforming_fraction(self) -> float:
        return len(self.nonconforming) / len(self.R_of) if self.R_of else 0.0

    def summary(self) -> dict:
        return {
            "status": self.status,
            "p_star": self.p_star,
            "p_star_std": self.p_star_std,
            "R_max": self.R_max,
            "R_max_per_run": {f"{i}:{s}": r for (i, s), r in sorted(self.R_max_per_run.items())},
            "n_runs": len(self.R_max_per_run),
            "n_records": len(self.R_of),
            "nonconforming_count": len(self.nonconforming),
            "nonconforming_fraction": self.nonconforming_fraction,
            "extrapolated": self.extrapolated,
            "grid": list(self.grid),
            "note": "p_star averages per-run, per-rank argmax_p I_r(p); this differs from argmax of the mean curve",
        }


def _argmax_smallest(values: np.ndarray) -> int:
    # np.argmax returns the first maximum: on an ascending grid, the smallest p
    return int(np.argmax(values))


def estimate_p_star(scan: SpectrumScan) -> NieReport:
    """Aggregate a spectrum scan into p* and the mean equalization curve."""
    scan.validate()
    grid = tuple(float(p) for p in scan.grid)
    runs = scan.runs()
    if not runs:
        raise ValueError("spectrum scan holds no runs")
    i_table, r_of, nonconf, r_run = {}, {}, [], {}
    for run in runs:
        ref = scan.records[(run[0], run[1], 0.0)]
        best = 0
        for p in grid:
            ratios = importance_ratio(scan.records[(run[0], run[1], p)], ref)
            res = detect_R(ratios)
            key = (run[0], run[1], p)
            i_table[key] = ratios
            r_of[key] = res.R
            if not res.conforming:
                nonconf.append(key)
            best = max(best, res.R)
        r_run[run] = best
    r_max = min(r_run.values())
    n_grid = len(grid)
    if r_max == 0:
        return NieReport(grid, i_table, r_of, nonconf, r_run, 0, None, None, [],
                         np.full(n_grid, np.nan), np.full(n_grid, np.nan), "no-equalization")
    samples = []
    curves = np.zeros((len(runs), n_grid))
    for j, run in enumerate(runs):
        mat = np.stack([i_table[(run[0], run[1], p)][:r_max] for p in grid])  # (n_grid, R_max)
        for r in range(r_max):
            samples.append(grid[_argmax_smallest(mat[:, r])])
        curves[j] = mat.sum(axis=1) / r_max
    p_star = float(np.mean(samples))
    p_std = float(np.std(samples))
    extrapolated = not (grid[0] <= p_star <= grid[-1])
    return NieReport(grid, i_table, r_of, nonconf, r_run, r_max, p_star, p_std, samples,
                     curves.mean(axis=0), curves.std(axis=0), "ok", extrapolated)


__all__ = ["importance_ratio", "detect_R", "RankResult", "SpectrumScan", "NieReport", "estimate_p_star"]
