"""Quantum Fisher information matrices of pure and noisy circuit states.

The mixed-state QFIM is assembled from finite-difference state derivatives in
the eigenbasis of rho:

    F_ij = 2 sum_{k,l} Re(<k|d_i rho|l><l|d_j rho|k>) / (lam_k + lam_l),

with pairs whose eigenvalue sum falls below ``eig_cutoff`` dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .circuits import NOISELESS, CircuitSpec, NoiseSetting, shifted_states
from .qcore import dagger

DEFAULT_STEP = 1e-4
MIN_STEP = 1e-7
MAX_STEP = 1e-2
EIG_CUTOFF = 1e-10
MACHINE_EPS = 2.22e-16
PURE_NORM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class QfimResult:
    """Symmetric P x P QFIM with its ascending eigenvalues."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    context: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


def _result(f: np.ndarray, context: dict | None = None) -> QfimResult:
    f = 0.5 * (f + f.T)
    lam = np.linalg.eigvalsh(f) if f.size else np.zeros(0)
    return QfimResult(f, lam, dict(context or {}))


def check_step(h: float) -> float:
    h = float(h)
    if not h >= MIN_STEP:
        raise ValueError(f"finite-difference step {h!r} below {MIN_STEP:g} (round-off dominated)")
    if h > MAX_STEP:
        raise ValueError(f"finite-difference step {h!r} above {MAX_STEP:g}")
    return h


def rho_and_derivatives(
    spec: CircuitSpec, x, theta, noise: NoiseSetting = NOISELESS, h: float = DEFAULT_STEP
) -> tuple[np.ndarray, np.ndarray]:
    """rho(theta) and central differences d_i rho, shape (P, d, d)."""
    h = check_step(h)
    rho, plus, minus = shifted_states(spec, x, theta, noise, h)
    return rho, (plus - minus) / (2.0 * h)


def state_derivatives(
    spec: CircuitSpec, x, theta, noise: NoiseSetting = NOISELESS, h: float = DEFAULT_STEP
) -> list[np.ndarray]:
    """d rho / d theta_i by central differences with step ``h``."""
    return list(rho_and_derivatives(spec, x, theta, noise, h)[1])


def qfim_pure(psi: np.ndarray, dpsi, context: dict | None = None) -> QfimResult:
    """F_ij = 4 Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>)."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    dpsi = np.asarray(dpsi, dtype=complex).reshape(-1, psi.shape[0])
    drift = abs(float(np.vdot(psi, psi).real) - 1.0)
    if drift > PURE_NORM_TOL:
        raise ValueError(f"state norm drifts from 1 by {drift:.3e}")
    overlaps = dpsi.conj() @ psi
    gram = dpsi.conj() @ dpsi.T
    f = 4.0 * np.real(gram - np.outer(overlaps, overlaps.conj()))
    return _result(f, context)


def qfim_mixed(rho: np.ndarray, drho, eig_cutoff: float = EIG_CUTOFF, context: dict | None = None) -> QfimResult:
    """Mixed-state QFIM from rho and its derivatives (eigenbasis form)."""
    if not eig_cutoff > 0:
        raise ValueError(f"eig_cutoff must be positive, got {eig_cutoff!r}")
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if drho.ndim == 2:
        drho = drho[None]
    lam, v = np.linalg.eigh(0.5 * (rho + dagger(rho)))
    sums = lam[:, None] + lam[None, :]
    keep = sums > eig_cutoff
    w = np.zeros_like(sums)
    w[keep] = 1.0 / sums[keep]
    d = 0.5 * (drho + np.conj(np.swapaxes(drho, 1, 2)))
    e = (v.conj().T @ d @ v) * np.sqrt(w)
    e = e.reshape(e.shape[0], -1)
    # E_j Hermitian, so <l|d_j|k> = conj(<k|d_j|l>); result is a PSD Gram matrix
    f = 2.0 * np.real(e @ e.conj().T)
    return _result(f, context)


def compute_qfim(
    spec: CircuitSpec,
    x,
    theta,
    noise: NoiseSetting = NOISELESS,
    h: float = DEFAULT_STEP,
    eig_cutoff: float = EIG_CUTOFF,
    context: dict | None = None,
) -> QfimResult:
    rho, drho = rho_and_derivatives(spec, x, theta, noise, h)
    ctx = {"circuit": spec.label, "noise_kind": noise.kind, "p": noise.p}
    ctx.update(context or {})
    return qfim_mixed(rho, drho, eig_cutoff, ctx)


def default_rank_tol(q: QfimResult) -> float:
    """Machine epsilon times P times the largest eigenvalue."""
    if q.eigenvalues.size == 0:
        return 0.0
    return MACHINE_EPS * q.n_params * max(float(q.eigenvalues[-1]), 0.0)


def effective_dimension(q: QfimResult, tol: float | None = None) -> int:
    """Numerical rank: number of eigenvalues above ``tol``."""
    tol = default_rank_tol(q) if tol is None else tol
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if q.eigenvalues.size == 0 or q.eigenvalues[-1] <= 0.0:
        return 0
    return int(np.count_nonzero(q.eigenvalues > tol))


class LogDet(NamedTuple):
    value: float
    is_effectively_zero: bool


LOG_CLIP = 1e-300


def log_determinant(q: QfimResult, guard: float | None = None) -> LogDet:
    """sum_r ln(max(lam_r, 1e-300)); flagged when any eigenvalue is at or
    below ``guard`` (default: the rank tolerance), i.e. det F is numerically 0."""
    lam = q.eigenvalues
    guard = default_rank_tol(q) if guard is None else guard
    value = float(np.sum(np.log(np.maximum(lam, LOG_CLIP))))
    flag = bool(lam.size == 0 or np.any(lam <= guard) or lam[-1] <= 0.0)
    return LogDet(value, flag)


def descending_partial_sums(eigenvalues) -> np.ndarray:
    return np.cumsum(np.sort(np.asarray(eigenvalues, dtype=float))[::-1])


def weakly_majorized(noisy, clean, slack: float = 1e-8) -> bool:
    """True when every top-k partial sum of ``noisy`` is <= that of ``clean``."""
    a, b = descending_partial_sums(noisy), descending_partial_sums(clean)
    if a.shape != b.shape:
        raise ValueError("eigenvalue vectors differ in length")
    return bool(np.all(a <= b + slack))


__all__ = [
    "QfimResult", "LogDet", "state_derivatives", "rho_and_derivatives", "qfim_pure", "qfim_mixed",
    "compute_qfim", "effective_dimension", "default_rank_tol", "log_determinant", "check_step",
    "weakly_majorized", "descending_partial_sums", "DEFAULT_STEP", "EIG_CUTOFF",
]
