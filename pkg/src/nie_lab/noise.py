"""Single-qubit Kraus channels: depolarizing, dephasing, amplitude damping."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qcore import I2, X, Y, Z, dagger, n_qubits_of

KINDS = ("depolarizing", "dephasing", "amplitude_damping")
ALIASES = {
    "dp": "depolarizing",
    "depol": "depolarizing",
    "pd": "dephasing",
    "phase_damping": "dephasing",
    "ad": "amplitude_damping",
    "amp": "amplitude_damping",
}


def canonical_kind(kind: str) -> str:
    k = ALIASES.get(kind.lower(), kind.lower())
    if k not in KINDS:
        raise ValueError(f"unknown channel kind {kind!r}; expected one of {KINDS} or {sorted(ALIASES)}")
    return k


@dataclass(frozen=True)
class KrausChannel:
    kind: str
    p: float
    kraus_ops: tuple[np.ndarray, ...]

    def completeness_defect(self) -> float:
        acc = sum(dagger(k) @ k for k in self.kraus_ops)
        return float(np.linalg.norm(acc - I2))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        """Act on a single-qubit state."""
        return sum(k @ rho @ dagger(k) for k in self.kraus_ops)


def make_channel(kind: str, p: float) -> KrausChannel:
    """Kraus set for ``kind`` at noise level ``p``.

    Depolarizing uses the convex form rho -> p I/2 + (1-p) rho.
    """
    kind = canonical_kind(kind)
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise level must lie in [0, 1], got {p!r}")
    if kind == "depolarizing":
        ops = (
            np.sqrt(1.0 - 0.75 * p) * I2,
            np.sqrt(p / 4.0) * X,
            np.sqrt(p / 4.0) * Y,
            np.sqrt(p / 4.0) * Z,
        )
    elif kind == "dephasing":
        ops = (
            np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=complex),
            np.array([[0.0, 0.0], [0.0, np.sqrt(p)]], dtype=complex),
        )
    else:
        ops = (
            np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=complex),
            np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=complex),
        )
    return KrausChannel(kind, p, ops)


def apply_channel(rho: np.ndarray, ch: KrausChannel, target_qubit: int) -> np.ndarray:
    """Apply ``ch`` to one qubit of a multi-qubit density matrix."""
    n = n_qubits_of(rho.shape[0])
    if not 0 <= target_qubit < n:
        raise ValueError(f"qubit index {target_qubit} out of range for {n} qubits")
    if ch.p == 0.0:
        return rho.copy()
    t = rho.reshape((2,) * (2 * n))
    out = np.zeros_like(t)
    q, qc = target_qubit, n + target_qubit
    for k in ch.kraus_ops:
        s = np.moveaxis(np.tensordot(k, t, axes=([1], [q])), 0, q)
        s = np.moveaxis(np.tensordot(k.conj(), s, axes=([1], [qc])), 0, qc)
        out += s
    return out.reshape(rho.shape)


@lru_cache(maxsize=256)
def _superop_cached(kind: str, p: float, arity: int) -> np.ndarray:
    ch = make_channel(kind, p)
    ops = ch.kraus_ops
    if arity == 2:
        ops = tuple(np.kron(a, b) for a in ch.kraus_ops for b in ch.kraus_ops)
    s = sum(np.kron(k, k.conj()) for k in ops)
    s.setflags(write=False)
    return s


def superoperator(kind: str, p: float, arity: int = 1) -> np.ndarray:
    """Channel applied independently to ``arity`` qubits, as a matrix.

    Row/column index is (a_1..a_k, b_1..b_k) for rho[a, b], row-major, so
    vec(N(rho)) = S @ vec(rho) with ``vec`` the row-major flattening.
    """
    if arity not in (1, 2):
        raise ValueError("arity must be 1 or 2")
    return _superop_cached(canonical_kind(kind), float(p), arity)
