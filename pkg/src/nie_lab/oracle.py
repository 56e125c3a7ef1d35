"""Independent reference computations.

Closed-form two-level dephasing models, a Bures-Hessian QFIM built only from
fidelities, the three-term eigen-derivative QFIM expression, a Bloch-vector
QFI for one qubit and a naive full-matrix circuit evaluator. None of these
share code paths with the production QFIM or simulator.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import noise as noise_mod
from .circuits import NOISELESS, CircuitSpec, NoiseSetting, gate_matrix
from .qcore import dagger, uhlmann_fidelity
from .qfim import QfimResult

# ---------------------------------------------------------------------------
# two-level dephasing toys


def _gammas(delta_ell: float, gamma: float, t: float) -> tuple[float, float]:
    big = 0.5 * gamma * t * delta_ell**2
    prime = 0.5 * gamma * delta_ell**2
    return big, prime


def _alpha_exact(big: float, prime: float) -> float:
    # Gamma'^2 / (1 - e^{-2 Gamma}), with the Gamma -> 0 limit Gamma'/(2t) * Gamma'/Gamma' -> 0
    if big == 0.0:
        return 0.0
    return prime**2 / -np.expm1(-2.0 * big)


def toy_single_qfi(delta_E: float, delta_ell: float, gamma: float, t: float) -> float:
    """QFI of the single-parameter dephased qubit:
    F = (Gamma'^2 / (1 - e^{-2 Gamma}) + dE^2) e^{-2 Gamma}, Gamma = gamma t dl^2 / 2."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma!r}")
    big, prime = _gammas(delta_ell, gamma, t)
    return float((_alpha_exact(big, prime) + delta_E**2) * np.exp(-2.0 * big))


def toy_gamma_star(delta_E: float, delta_ell: float, t: float) -> float | None:
    """Maximizer of the small-gamma parabola, (1 - 4 dE^2 t^2) / (2 dl^2 t).

    ``None`` when the formula is negative (no physical optimum); an exact
    zero is returned as 0.0 (optimum at the noiseless point).
    """
    if delta_ell == 0:
        raise ValueError("delta_ell must be nonzero")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    g = (1.0 - 4.0 * delta_E**2 * t**2) / (2.0 * delta_ell**2 * t)
    if g < 0:
        return None
    return float(g)


def toy_single_rho(delta_E: float, delta_ell: float, gamma: float, t: float) -> np.ndarray:
    """Explicit 2x2 state of the single-parameter model in the energy basis."""
    big, _ = _gammas(delta_ell, gamma, t)
    coh = 0.5 * np.exp(-1j * delta_E * t) * np.exp(-big)
    return np.array([[0.5, coh], [np.conj(coh), 0.5]], dtype=complex)


class ToyMultiEigs(NamedTuple):
    lam_plus: float
    lam_minus: float
    lam_plus_exact: float
    lam_minus_exact: float


def toy_multi_matrix(delta_E, delta_ell: float, gamma: float, t) -> np.ndarray:
    """Exact QFIM F_ij = (dE_i dE_j + alpha) e^{-2 Gamma} of the commuting model."""
    de = np.asarray(delta_E, dtype=float).reshape(-1)
    t_tot = float(np.sum(t))
    big, prime = _gammas(delta_ell, gamma, t_tot)
    alpha = _alpha_exact(big, prime)
    return (np.outer(de, de) + alpha) * np.exp(-2.0 * big)


def toy_multi_eigvals(delta_E, delta_ell: float, gamma: float, t) -> ToyMultiEigs:
    """The two nonzero QFIM eigenvalues of the multi-parameter model.

    Approximate (first order in gamma) and exact (quadratic with trace T and
    determinant D of the rank-2 matrix). ``t`` may be a vector of times; the
    total time enters.
    """
    de = np.asarray(delta_E, dtype=float).reshape(-1)
    if de.size == 0 or not np.any(de != 0):
        raise ValueError("delta_E must contain a nonzero entry (a = sum dE^2 would vanish)")
    t_tot = float(np.sum(t))
    if not t_tot > 0 or np.any(np.asarray(t) <= 0):
        raise ValueError("times must be positive")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    a = float(np.sum(de**2))
    b = float(np.sum(de))
    c = float(de.size)
    alpha = gamma * delta_ell**2 / (4.0 * t_tot)
    lam_plus = (1.0 - gamma * t_tot * delta_ell**2) * a + alpha * b * b / a
    # Lagrange identity: a c - b^2 = sum_{i<j} (dE_i - dE_j)^2, exactly 0 for equal entries
    spread = 0.5 * float(np.sum((de[:, None] - de[None, :]) ** 2))
    lam_minus = alpha * spread / a

    big, prime = _gammas(delta_ell, gamma, t_tot)
    ae = _alpha_exact(big, prime)
    damp = np.exp(-2.0 * big)
    tr = damp * (a + ae * c)
    det = damp**2 * ae * spread
    disc = np.sqrt(max(tr * tr - 4.0 * det, 0.0))
    lam_plus_exact = 0.5 * (tr + disc)
    # product form avoids cancellation in the small root
    lam_minus_exact = det / lam_plus_exact if lam_plus_exact > 0 else 0.0
    return ToyMultiEigs(float(lam_plus), float(lam_minus), float(lam_plus_exact), float(lam_minus_exact))


def numerical_qfi(rho_of, t: float, h: float = 1e-5) -> float:
    """Single-parameter QFI of a state family via eigenbasis formula and
    central differences; used to cross-check the closed forms."""
    rho = rho_of(t)
    drho = (rho_of(t + h) - rho_of(t - h)) / (2.0 * h)
    lam, v = np.linalg.eigh(rho)
    e = v.conj().T @ drho @ v
    tot = 0.0
    for k in range(len(lam)):
        for l in range(len(lam)):
            s = lam[k] + lam[l]
            if s > 1e-12:
                tot += 2.0 * abs(e[k, l]) ** 2 / s
    return float(tot)


# ---------------------------------------------------------------------------
# single-qubit Bloch picture

_BLOCH_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.array([np.real(np.trace(rho @ s)) for s in _BLOCH_PAULIS])


def channel_bloch_map(kind: str, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Affine action r -> M r + c of a single-qubit channel, written out by hand."""
    kind = noise_mod.canonical_kind(kind)
    if kind == "depolarizing":
        return (1.0 - p) * np.eye(3), np.zeros(3)
    if kind == "dephasing":
        s = np.sqrt(1.0 - p)
        return np.diag([s, s, 1.0]), np.zeros(3)
    s = np.sqrt(1.0 - p)
    return np.diag([s, s, 1.0 - p]), np.array([0.0, 0.0, p])


def bloch_qfi(r: np.ndarray, dr: np.ndarray, purity_tol: float = 1e-12) -> float:
    """F = |dr|^2 + (r . dr)^2 / (1 - |r|^2); the second term is dropped for pure r."""
    r, dr = np.asarray(r, float), np.asarray(dr, float)
    gap = 1.0 - float(r @ r)
    f = float(dr @ dr)
    if gap > purity_tol:
        f += float(r @ dr) ** 2 / gap
    return f


def rx_channel_bloch_qfi(kind: str, p: float, theta: float) -> float:
    """QFI of RX(theta)|0> followed by one channel, from the analytic Bloch vector."""
    m, c = channel_bloch_map(kind, p)
    r0 = np.array([0.0, -np.sin(theta), np.cos(theta)])
    dr0 = np.array([0.0, -np.cos(theta), -np.sin(theta)])
    return bloch_qfi(m @ r0 + c, m @ dr0)


# ---------------------------------------------------------------------------
# naive circuit evaluator


def _embed(op: np.ndarray, wires: tuple[int, ...], n: int) -> np.ndarray:
    """Full 2^n matrix of ``op`` acting on ``wires`` (qubit 0 most significant),
    built column by column from basis states."""
    d = 2**n
    k = len(wires)
    full = np.zeros((d, d), dtype=complex)
    for col in range(d):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = 0
        for w in wires:
            sub_in = 2 * sub_in + bits[w]
        for sub_out in range(2**k):
            amp = op[sub_out, sub_in]
            if amp == 0:
                continue
            out_bits = list(bits)
            for j, w in enumerate(wires):
                out_bits[w] = (sub_out >> (k - 1 - j)) & 1
            row = 0
            for b in out_bits:
                row = 2 * row + b
            full[row, col] += amp
    return full


def reference_evaluate(spec: CircuitSpec, x, theta, noise: NoiseSetting = NOISELESS) -> tuple[np.ndarray, float]:
    """rho and Tr[O rho] with full-size unitaries and Kraus sums, gate by gate."""
    n = spec.n_qubits
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    angles = spec.angles(x, theta)
    ch = None if noise.noiseless else noise_mod.make_channel(noise.kind, noise.p)
    for g, a in zip(spec.gates, angles):
        u = _embed(gate_matrix(g.kind, a), g.wires, n)
        rho = u @ rho @ dagger(u)
        if ch is not None:
            for w in g.wires:
                ks = [_embed(k, (w,), n) for k in ch.kraus_ops]
                rho = sum(k @ rho @ dagger(k) for k in ks)
    return rho, float(np.real(np.trace(spec.observable @ rho)))


# ---------------------------------------------------------------------------
# QFIM oracles

BURES_STEP = 1e-3
ASYMMETRY_TOL = 1e-4


def bures_hessian_qfim(
    spec: CircuitSpec,
    x,
    theta,
    noise: NoiseSetting = NOISELESS,
    step: float = BURES_STEP,
    max_params: int = 8,
) -> QfimResult:
    """QFIM as the Hessian of 4 (1 - sqrt(F(rho(theta), rho(theta + d)))) at d = 0.

    The prefactor makes the pure-state limit equal the Fubini-Study form
    4 Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>). Central second
    differences; each ordered pair (i, j) is evaluated on its own and the
    asymmetry is checked before symmetrizing.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.shape[0]
    if p > max_params:
        raise ValueError(f"Bures-Hessian oracle limited to {max_params} parameters, got {p}")
    rho0 = reference_evaluate(spec, x, theta, noise)[0]
    eye = np.eye(p)

    def g(delta):
        rho = reference_evaluate(spec, x, theta + delta, noise)[0]
        return 4.0 * (1.0 - np.sqrt(uhlmann_fidelity(rho0, rho)))

    h = np.zeros((p, p))
    for i in range(p):
        h[i, i] = (g(step * eye[i]) + g(-step * eye[i])) / step**2
        for j in range(p):
            if j == i:
                continue
            ei, ej = step * eye[i], step * eye[j]
            h[i, j] = (g(ei + ej) - g(ei - ej) - g(ej - ei) + g(-ei - ej)) / (4.0 * step**2)
    asym = float(np.max(np.abs(h - h.T))) if p else 0.0
    if asym > ASYMMETRY_TOL:
        raise ValueError(f"Bures Hessian asymmetric by {asym:.3e}; step {step} badly conditioned")
    h = 0.5 * (h + h.T)
    return QfimResult(h, np.linalg.eigvalsh(h), {"oracle": "bures-hessian", "prefactor": 4.0, "step": step})


def qfim_eq6_direct(rho: np.ndarray, drho, eig_cutoff: float = 1e-10) -> np.ndarray:
    """Three-term mixed-state QFIM from eigenvalue and eigenvector derivatives.

    sum_k [d_i lam_k d_j lam_k / lam_k + 4 lam_k Re<d_i k|d_j k>]
      - sum_{k,l} 8 lam_k lam_l / (lam_k + lam_l) Re(<d_i l|k><k|d_j l>)

    over nonzero eigenvalues, with first-order perturbation theory for the
    derivatives (non-degenerate spectrum assumed).
    """
    drho = np.asarray(drho, dtype=complex)
    lam, v = np.linalg.eigh(rho)
    d = len(lam)
    nz = [k for k in range(d) if lam[k] > eig_cutoff]
    p = drho.shape[0]
    dlam = np.zeros((p, d))
    dvec = np.zeros((p, d, d), dtype=complex)  # dvec[i, :, k] = d_i |k> in eigenbasis coords
    for i in range(p):
        e = v.conj().T @ drho[i] @ v
        dlam[i] = np.real(np.diag(e))
        for k in nz:
            for l in range(d):
                if l != k:
                    dvec[i, l, k] = e[l, k] / (lam[k] - lam[l])
    f = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            tot = 0.0
            for k in nz:
                tot += dlam[i, k] * dlam[j, k] / lam[k]
                tot += 4.0 * lam[k] * np.real(np.vdot(dvec[i, :, k], dvec[j, :, k]))
            for k in nz:
                for l in nz:
                    # <d_i l|k> = conj(dvec[i, k, l]); <k|d_j l> = dvec[j, k, l]
                    w = 8.0 * lam[k] * lam[l] / (lam[k] + lam[l])
                    tot -= w * np.real(np.conj(dvec[i, k, l]) * dvec[j, k, l])
            f[i, j] = tot
    return f


__all__ = [
    "toy_single_qfi", "toy_gamma_star", "toy_single_rho", "toy_multi_eigvals", "toy_multi_matrix",
    "ToyMultiEigs", "numerical_qfi", "bloch_vector", "bloch_qfi", "channel_bloch_map",
    "rx_channel_bloch_qfi", "reference_evaluate", "bures_hessian_qfim", "qfim_eq6_direct",
]
