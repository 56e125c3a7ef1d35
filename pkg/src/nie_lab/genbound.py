"""QFIM-based generalization bound and its noise-dependent factor B(p).

    B = sqrt(d) * [Gamma(d/2 + 1) / m]^(1/d) * L_f
    bound = 24 pi / sqrt(M) * B + 3 sqrt(ln(2/delta) / (2M))

evaluated in log space, with m the smallest sampled sqrt(det F).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .circuits import CircuitSpec, NoiseSetting, value_and_grad_batch
from .qfim import compute_qfim, effective_dimension, log_determinant

DEFAULT_DELTA = 0.1


@dataclass(frozen=True)
class BoundInputs:
    d_eff: int
    log_m: float
    L_f: float
    M: int = 1
    delta: float = DEFAULT_DELTA
    computable: bool = True
    reason: str = ""


class BoundResult(NamedTuple):
    value: float
    computable: bool
    reason: str = ""


def _not(reason: str) -> BoundResult:
    return BoundResult(math.nan, False, reason)


def bound_term_B(inputs: BoundInputs) -> BoundResult:
    if not inputs.computable:
        return _not(inputs.reason or "inputs flagged not computable")
    if inputs.d_eff < 1:
        return _not("effective dimension is 0")
    if not math.isfinite(inputs.log_m):
        return _not("log m is not finite")
    if inputs.L_f < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    if inputs.L_f == 0:
        return BoundResult(0.0, True)
    d = inputs.d_eff
    log_b = 0.5 * math.log(d) + (math.lgamma(d / 2 + 1) - inputs.log_m) / d + math.log(inputs.L_f)
    if log_b > 709.0:
        return _not(f"B overflows (log B = {log_b:.1f})")
    return BoundResult(math.exp(log_b), True)


def full_bound(inputs: BoundInputs) -> BoundResult:
    if inputs.M < 1:
        raise ValueError("M must be >= 1")
    if not 0 < inputs.delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    b = bound_term_B(inputs)
    if not b.computable:
        return b
    tail = 3.0 * math.sqrt(math.log(2.0 / inputs.delta) / (2.0 * inputs.M))
    return BoundResult(24.0 * math.pi / math.sqrt(inputs.M) * b.value + tail, True)


def estimate_lipschitz(spec: CircuitSpec, inputs, thetas: Sequence[np.ndarray], noise: NoiseSetting) -> float:
    """Largest parameter-gradient norm of f over every (input, theta) pair."""
    xs = np.asarray(inputs, dtype=float).reshape(-1, spec.n_features)
    best = 0.0
    for theta in thetas:
        _, jac = value_and_grad_batch(spec, xs, theta, noise)
        best = max(best, float(np.max(np.linalg.norm(jac, axis=1))))
    return best


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class BoundCell:
    p: float
    d_eff_mean: float
    d_eff_std: float
    d_eff: int
    log_m: float
    log_sqrt_det_mean: float
    log_sqrt_det_std: float
    L_f: float
    B: float
    bound: float
    computable: bool
    reason: str
    n_samples: int


def bound_cell(
    spec: CircuitSpec,
    inputs,
    thetas: Sequence[np.ndarray],
    noise: NoiseSetting,
    M: int,
    delta: float = DEFAULT_DELTA,
    h: float = 1e-4,
) -> BoundCell:
    """B(p) and its ingredients at one noise level from all (input, theta) samples."""
    xs = np.asarray(inputs, dtype=float).reshape(-1, spec.n_features)
    ranks, half_logdets, flagged = [], [], 0
    for theta in thetas:
        for x in xs:
            q = compute_qfim(spec, x, theta, noise, h=h)
            ranks.append(effective_dimension(q))
            ld = log_determinant(q)
            half_logdets.append(0.5 * ld.value)
            flagged += ld.is_effectively_zero
    l_f = estimate_lipschitz(spec, xs, thetas, noise)
    ranks_a = np.array(ranks, dtype=float)
    hl = np.array(half_logdets)
    d_eff = round_half_up(float(ranks_a.mean()))
    reason = f"sqrt(det F) numerically zero in {flagged} of {len(ranks)} samples" if flagged else ""
    inp = BoundInputs(d_eff, float(hl.min()), l_f, M, delta, computable=not flagged, reason=reason)
    b = bound_term_B(inp)
    full = full_bound(inp)
    return BoundCell(
        noise.p, float(ranks_a.mean()), float(ranks_a.std()), d_eff, float(hl.min()), float(hl.mean()),
        float(hl.std()), l_f, b.value, full.value, b.computable, b.reason, len(ranks),
    )


@dataclass
class BoundScan:
    cells: list[BoundCell]
    argmin_p: float | None
    status: str

    def summary(self) -> dict:
        computable = [c for c in self.cells if c.computable]
        interior = None
        if self.argmin_p is not None:
            ps = [c.p for c in self.cells]
            interior = ps[0] < self.argmin_p < ps[-1]
        return {
            "status": self.status,
            "argmin_p": self.argmin_p,
            "argmin_interior": interior,
            "n_cells": len(self.cells),
            "n_computable": len(computable),
            "d_eff_rounding": "mean rank rounded half-up to an integer",
        }


def argmin_cells(cells: Sequence[BoundCell]) -> BoundScan:
    ok = [c for c in cells if c.computable]
    if not ok:
        return BoundScan(list(cells), None, "not computable anywhere")
    best = min(ok, key=lambda c: (c.B, c.p))
    return BoundScan(list(cells), best.p, "ok")


def scan_bound(
    spec: CircuitSpec,
    inputs,
    grid: Sequence[float],
    thetas: Sequence[np.ndarray],
    noise_kind: str,
    M: int,
    delta: float = DEFAULT_DELTA,
) -> BoundScan:
    if not len(grid):
        raise ValueError("noise grid is empty")
    cells = [bound_cell(spec, inputs, thetas, NoiseSetting(noise_kind, p), M, delta) for p in grid]
    return argmin_cells(cells)


__all__ = [
    "BoundInputs", "BoundResult", "bound_term_B", "full_bound", "estimate_lipschitz", "BoundCell",
    "bound_cell", "BoundScan", "argmin_cells", "scan_bound", "round_half_up", "DEFAULT_DELTA",
]
