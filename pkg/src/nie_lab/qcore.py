"""Dense linear algebra, states, observables and fidelity measures.

States and operators are plain complex ``numpy`` arrays. Qubit 0 is the most
significant (leftmost) tensor factor throughout the package.
"""

from __future__ import annotations

from functools import reduce
from typing import NamedTuple

import numpy as np

# Tolerances; callers may override per call.
HERMITIAN_TOL = 1e-10
STATE_HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_SLACK = 1e-10
NORM_TOL = 1e-12
# Eigenvalues of a state below this are treated as exact zeros when
# square-rooting; they are round-off from pure or low-rank states.
SQRT_EIG_FLOOR = 1e-14

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def kron_all(*mats: np.ndarray) -> np.ndarray:
    return reduce(np.kron, mats)


def hermiticity_defect(m: np.ndarray) -> float:
    """Max elementwise |m - m^dagger|."""
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def hermitian_eig(m: np.ndarray, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Ascending eigen-decomposition of a Hermitian matrix.

    Raises ``ValueError`` when ``m`` deviates from Hermiticity by more than
    ``tol`` (max elementwise norm of ``m - m^dagger``).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    defect = hermiticity_defect(m)
    if defect > tol:
        raise ValueError(f"matrix is not Hermitian: max|m - m^dagger| = {defect:.3e} > {tol:.1e}")
    vals, vecs = np.linalg.eigh(0.5 * (m + dagger(m)))
    return EigenDecomposition(vals, vecs)


def n_qubits_of(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def basis_state(bits: str) -> np.ndarray:
    """Computational basis vector, e.g. ``basis_state("010")``."""
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def check_pure_state(psi: np.ndarray, tol: float = NORM_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    n_qubits_of(psi.shape[0])
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"state norm^2 = {norm2!r} deviates from 1 by more than {tol:.1e}")
    return psi


def density_matrix(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def maximally_mixed(n_qubits: int) -> np.ndarray:
    d = 2**n_qubits
    return np.eye(d, dtype=complex) / d


def check_density_matrix(
    rho: np.ndarray,
    herm_tol: float = STATE_HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    psd_slack: float = PSD_SLACK,
) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity; return ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    n_qubits_of(rho.shape[0])
    defect = hermiticity_defect(rho)
    if defect > herm_tol:
        raise ValueError(f"density matrix not Hermitian (defect {defect:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace {tr!r} != 1")
    lam_min = float(np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0])
    if lam_min < -psd_slack:
        raise ValueError(f"density matrix has negative eigenvalue {lam_min:.3e}")
    return rho


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def check_observable(obs: np.ndarray, tol: float = STATE_HERMITIAN_TOL) -> np.ndarray:
    obs = np.asarray(obs, dtype=complex)
    if obs.ndim != 2 or obs.shape[0] != obs.shape[1]:
        raise ValueError(f"observable must be square, got {obs.shape}")
    defect = hermiticity_defect(obs)
    if defect > tol:
        raise ValueError(f"observable not Hermitian (defect {defect:.3e})")
    return obs


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of Paulis, ``pauli_string("ZII")`` = Z on qubit 0."""
    return kron_all(*(PAULI[c] for c in label.upper()))


def expectation(rho: np.ndarray, obs: np.ndarray, imag_tol: float = 1e-10) -> float:
    """Re Tr[O rho]; a non-negligible imaginary part is an error."""
    if rho.shape != obs.shape:
        raise ValueError(f"dimension mismatch: state {rho.shape} vs observable {obs.shape}")
    val = np.einsum("ij,ji->", obs, rho)
    if abs(val.imag) > imag_tol:
        raise ValueError(f"Tr[O rho] has imaginary part {val.imag:.3e}")
    return float(val.real)


def psd_sqrt(m: np.ndarray, floor: float = SQRT_EIG_FLOOR, psd_slack: float = PSD_SLACK) -> np.ndarray:
    """Square root of a PSD matrix via eigen-decomposition.

    Eigenvalues below ``floor`` (including slightly negative round-off) are
    set to zero before taking the root.
    """
    vals, vecs = hermitian_eig(m, tol=max(HERMITIAN_TOL, psd_slack))
    if vals[0] < -psd_slack:
        raise ValueError(f"matrix has negative eigenvalue {vals[0]:.3e} beyond PSD slack")
    vals = np.where(vals > floor, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ dagger(vecs)


def uhlmann_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    The trace of that root equals the trace norm of ``sqrt(rho) sqrt(sigma)``,
    which is what is evaluated: singular values stay accurate where square
    roots of tiny eigenvalues would not.
    """
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    overlap = psd_sqrt(rho) @ psd_sqrt(sigma)
    root_fid = float(np.sum(np.linalg.svd(overlap, compute_uv=False)))
    return min(max(root_fid**2, 0.0), 1.0)


def bures_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    fid = uhlmann_fidelity(rho, sigma)
    return float(np.sqrt(max(2.0 * (1.0 - np.sqrt(fid)), 0.0)))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + dagger(a))


def random_pure_state(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    psi = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return psi / np.linalg.norm(psi)


def random_density_matrix(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    d = 2**n_qubits
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def permute_qubits(m: np.ndarray, perm: list[int] | tuple[int, ...]) -> np.ndarray:
    """Relabel qubits of an operator: old qubit ``q`` becomes ``perm[q]``."""
    n = n_qubits_of(m.shape[0])
    t = m.reshape((2,) * (2 * n))
    # new axis perm[q] takes old axis q
    order = [0] * n
    for q, new in enumerate(perm):
        order[new] = q
    t = np.transpose(t, order + [n + q for q in order])
    return t.reshape(m.shape)
