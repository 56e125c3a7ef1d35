"""Circuit description, the two built-in QNN architectures and noisy simulation.

The density-matrix engine stores rho as a rank-2n tensor (row axes first,
then column axes) and applies each gate together with its trailing noise as
one small superoperator on the touched axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import noise as noise_mod
from .qcore import X, Y, Z, check_observable, pauli_string, permute_qubits

GATE_KINDS = ("RX", "RY", "RZ", "CNOT", "RXX")
ROTATIONS = ("RX", "RY", "RZ", "RXX")
_GENERATORS = {"RX": X, "RY": Y, "RZ": Z, "RXX": np.kron(X, X)}
SHIFT = np.pi / 2

_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class Gate:
    """One gate. Rotation angles come from exactly one of ``param``
    (trainable index), ``feature`` (encoded, times ``scale``) or ``angle``."""

    kind: str
    wires: tuple[int, ...]
    param: int | None = None
    feature: int | None = None
    scale: float = 1.0
    angle: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if kind in ("CNOT", "RXX") else 1
        if len(self.wires) != arity or len(set(self.wires)) != arity:
            raise ValueError(f"{kind} needs {arity} distinct wire(s), got {self.wires}")
        sources = [s is not None for s in (self.param, self.feature, self.angle)]
        if kind == "CNOT":
            if any(sources):
                raise ValueError("CNOT takes no angle")
        elif sum(sources) != 1:
            raise ValueError(f"{kind} needs exactly one angle source (param, feature or angle)")

    @property
    def trainable(self) -> bool:
        return self.param is not None

    def angle_value(self, x: np.ndarray, theta: np.ndarray) -> float:
        if self.param is not None:
            return float(theta[self.param])
        if self.feature is not None:
            return float(self.scale * x[self.feature])
        if self.angle is not None:
            return float(self.angle)
        return 0.0


def gate_matrix(kind: str, angle: float = 0.0) -> np.ndarray:
    """R_G(phi) = exp(-i phi G / 2); CNOT has control on its first wire."""
    if kind == "CNOT":
        return _CNOT
    g = _GENERATORS[kind]
    eye = np.eye(g.shape[0], dtype=complex)
    return np.cos(angle / 2) * eye - 1j * np.sin(angle / 2) * g


@dataclass(frozen=True, eq=False)
class CircuitSpec:
    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int
    n_features: int
    observable: np.ndarray = field(repr=False)
    label: str = "circuit"
    allow_unused: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        obs = check_observable(self.observable)
        if obs.shape != (2**self.n_qubits,) * 2:
            raise ValueError(f"observable shape {obs.shape} does not match {self.n_qubits} qubits")
        object.__setattr__(self, "observable", obs)
        used = set()
        for g in self.gates:
            if any(not 0 <= w < self.n_qubits for w in g.wires):
                raise ValueError(f"gate {g} touches a wire outside 0..{self.n_qubits - 1}")
            if g.param is not None:
                if not 0 <= g.param < self.n_params:
                    raise ValueError(f"param index {g.param} outside [0, {self.n_params})")
                used.add(g.param)
            if g.feature is not None and not 0 <= g.feature < self.n_features:
                raise ValueError(f"feature index {g.feature} outside [0, {self.n_features})")
        missing = set(range(self.n_params)) - used
        if missing and not self.allow_unused:
            raise ValueError(f"trainable parameters never used: {sorted(missing)}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def occurrences(self, param: int) -> list[int]:
        return [k for k, g in enumerate(self.gates) if g.param == param]

    def angles(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if x.shape[0] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[0]}")
        if theta.shape[0] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape[0]}")
        return np.array([g.angle_value(x, theta) for g in self.gates])


@dataclass(frozen=True)
class NoiseSetting:
    kind: str | None = None
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= float(self.p) <= 1.0:
            raise ValueError(f"noise level must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "p", float(self.p))
        if self.kind is not None:
            object.__setattr__(self, "kind", noise_mod.canonical_kind(self.kind))

    @property
    def noiseless(self) -> bool:
        return self.kind is None or self.p == 0.0


NOISELESS = NoiseSetting()


# ---------------------------------------------------------------------------
# architectures


ENTANGLERS = ("chain", "ring")


def build_hea(
    n_layers: int, encoding_scale: float = np.pi, n_qubits: int = 5, entangler: str = "chain"
) -> CircuitSpec:
    """Hardware-efficient ansatz on 5 qubits with a single encoding block.

    Encoding: RY(s x) then RZ(s x) on every qubit. Each layer: RX, RZ, RX
    sublayers, each followed by the open CNOT chain 0->1->...->n-1
    (``entangler="ring"`` appends n-1 -> 0). Observable Z on qubit 0;
    15 parameters per layer.
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    if entangler not in ENTANGLERS:
        raise ValueError(f"entangler must be one of {ENTANGLERS}, got {entangler!r}")
    gates: list[Gate] = []
    for kind in ("RY", "RZ"):
        gates += [Gate(kind, (q,), feature=0, scale=encoding_scale) for q in range(n_qubits)]
    ladder = [Gate("CNOT", (q, q + 1)) for q in range(n_qubits - 1)]
    if entangler == "ring" and n_qubits > 2:
        ladder.append(Gate("CNOT", (n_qubits - 1, 0)))
    idx = 0
    for _ in range(n_layers):
        for kind in ("RX", "RZ", "RX"):
            for q in range(n_qubits):
                gates.append(Gate(kind, (q,), param=idx))
                idx += 1
            gates += ladder
    obs = pauli_string("Z" + "I" * (n_qubits - 1))
    suffix = "" if entangler == "chain" else f"-{entangler}"
    return CircuitSpec(n_qubits, tuple(gates), idx, 1, obs, label=f"hea-L{n_layers}{suffix}")


def build_ising_qnn(n_layers: int, encoding_scale: float = 1.0) -> CircuitSpec:
    """4-qubit model: RX(x0) on qubit 0 and RX(x1) on qubit 2, then per layer
    trainable RY on all qubits and a trainable RXX ring. Observable Z^4."""
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    gates = [
        Gate("RX", (0,), feature=0, scale=encoding_scale),
        Gate("RX", (2,), feature=1, scale=encoding_scale),
    ]
    idx = 0
    for _ in range(n_layers):
        for q in range(4):
            gates.append(Gate("RY", (q,), param=idx))
            idx += 1
        for pair in ((0, 1), (1, 2), (2, 3), (3, 0)):
            gates.append(Gate("RXX", pair, param=idx))
            idx += 1
    return CircuitSpec(4, tuple(gates), idx, 2, pauli_string("ZZZZ"), label=f"ising-L{n_layers}")


def build_circuit(
    name: str, n_layers: int, encoding_scale: float | None = None, entangler: str = "chain"
) -> CircuitSpec:
    name = name.lower()
    if name == "hea":
        return build_hea(n_layers, np.pi if encoding_scale is None else encoding_scale, entangler=entangler)
    if name == "ising":
        return build_ising_qnn(n_layers, 1.0 if encoding_scale is None else encoding_scale)
    raise ValueError(f"unknown circuit {name!r}; expected 'hea' or 'ising'")


def circuit_from_dict(d: dict) -> CircuitSpec:
    """Generic gate-list loader.

    ``{"n_qubits": 2, "n_params": 1, "n_features": 0, "observable": "ZI",
    "gates": [{"kind": "RX", "wires": [0], "param": 0}, ...]}``
    """
    gates = [
        Gate(
            g["kind"],
            tuple(g["wires"]),
            param=g.get("param"),
            feature=g.get("feature"),
            scale=float(g.get("scale", 1.0)),
            angle=g.get("angle"),
        )
        for g in d["gates"]
    ]
    obs = d["observable"]
    obs = pauli_string(obs) if isinstance(obs, str) else np.asarray(obs, dtype=complex)
    return CircuitSpec(
        int(d["n_qubits"]), tuple(gates), int(d["n_params"]), int(d.get("n_features", 0)),
        obs, label=d.get("label", "custom"), allow_unused=bool(d.get("allow_unused", False)),
    )


def relabel(spec: CircuitSpec, perm: Sequence[int]) -> CircuitSpec:
    """Same circuit with qubit ``q`` renamed ``perm[q]``; observable conjugated."""
    gates = tuple(
        Gate(g.kind, tuple(perm[w] for w in g.wires), g.param, g.feature, g.scale, g.angle)
        for g in spec.gates
    )
    return CircuitSpec(
        spec.n_qubits, gates, spec.n_params, spec.n_features,
        permute_qubits(spec.observable, perm), label=spec.label + "-relabeled",
        allow_unused=spec.allow_unused,
    )


# ---------------------------------------------------------------------------
# density-matrix engine
#
# Batched tensors carry a leading batch axis: shape (B, 2, ..., 2). A gate's
# superoperator acts on the row and column axes of its wires.


@lru_cache(maxsize=1024)
def _noise_superop(kind: str | None, p: float, arity: int) -> np.ndarray | None:
    if kind is None or p == 0.0:
        return None
    return noise_mod.superoperator(kind, p, arity)


@lru_cache(maxsize=1024)
def _sop_basis(kind: str, noise_kind: str | None, p: float) -> tuple[np.ndarray, ...]:
    """Matrices (A, B, C) with S(phi) = c^2 A + s^2 B + i c s C, c = cos(phi/2),
    s = sin(phi/2); a single fixed matrix for CNOT."""
    arity = 2 if kind in ("CNOT", "RXX") else 1
    n = _noise_superop(noise_kind, p, arity)
    if kind == "CNOT":
        mats = (np.kron(_CNOT, _CNOT),)
    else:
        g = _GENERATORS[kind]
        eye = np.eye(g.shape[0], dtype=complex)
        # (cI - isG) x (cI + isG*) expanded in c, s
        mats = (np.kron(eye, eye), np.kron(g, g.conj()), np.kron(eye, g.conj()) - np.kron(g, eye))
    if n is not None:
        mats = tuple(n @ m for m in mats)
    for m in mats:
        m.setflags(write=False)
    return mats


def _sop_from_basis(basis: tuple[np.ndarray, ...], angle) -> np.ndarray:
    """Superoperator for a scalar angle (d x d) or an angle vector (B x d x d)."""
    if len(basis) == 1:
        return basis[0]
    a, b, c3 = basis
    half = 0.5 * np.asarray(angle, dtype=float)
    c, s = np.cos(half), np.sin(half)
    if half.ndim == 0:
        return (c * c) * a + (s * s) * b + (1j * c * s) * c3
    c, s = c[:, None, None], s[:, None, None]
    return (c * c) * a + (s * s) * b + (1j * c * s) * c3


def step_superop(gate: Gate, angle: float, noise: NoiseSetting) -> np.ndarray:
    """Superoperator (4^k x 4^k) of ``gate`` followed by its noise channels.

    Index convention (a_1..a_k, b_1..b_k) for rho[a, b], row-major.
    """
    return _sop_from_basis(_sop_basis(gate.kind, noise.kind, noise.p), angle)


def _apply(t: np.ndarray, sop: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Apply ``sop`` to the ``axes`` (batch axis excluded) of batched tensor ``t``.

    ``sop`` is shared (d x d) or per batch element (B x d x d).
    """
    m = len(axes)
    ax = tuple(a + 1 for a in axes)
    last = tuple(range(-m, 0))
    moved = np.moveaxis(t, ax, last)
    shape = moved.shape
    d = 2**m
    if sop.ndim == 2:
        out = moved.reshape(-1, d) @ sop.T
    else:
        out = np.matmul(moved.reshape(shape[0], -1, d), sop.transpose(0, 2, 1))
    return np.moveaxis(out.reshape(shape), last, ax)


def _axes(spec: CircuitSpec, gate: Gate) -> tuple[int, ...]:
    return gate.wires + tuple(spec.n_qubits + w for w in gate.wires)


def initial_tensor(n_qubits: int, batch: int = 1) -> np.ndarray:
    t = np.zeros((batch,) + (2,) * (2 * n_qubits), dtype=complex)
    t[(slice(None),) + (0,) * (2 * n_qubits)] = 1.0
    return t


def _angle_matrix(spec: CircuitSpec, xs, theta) -> np.ndarray:
    """Gate angles for a batch of inputs, shape (B, n_gates)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs.reshape(1, -1) if spec.n_features != 1 or xs.size == 1 else xs.reshape(-1, 1)
    return np.stack([spec.angles(x, theta) for x in xs]) if len(xs) else np.zeros((0, len(spec.gates)))


def _gate_sop(basis, col: np.ndarray) -> np.ndarray:
    """Shared superoperator when all batch angles agree, else per element."""
    if len(basis) == 1 or np.all(col == col[0]):
        return _sop_from_basis(basis, col[0])
    return _sop_from_basis(basis, col)


def _transpose_sop(s: np.ndarray) -> np.ndarray:
    return s.T if s.ndim == 2 else s.transpose(0, 2, 1)


def _observable_tensor(spec: CircuitSpec) -> np.ndarray:
    # <A, rho> = sum(A * rho) = Tr[O rho] with A = O^T
    return spec.observable.T.reshape((1,) + (2,) * (2 * spec.n_qubits))


def _pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched <a, b> = sum over tensor axes of a * b (real part)."""
    bsz = max(a.shape[0], b.shape[0])
    return np.real((a * b).reshape(bsz, -1).sum(axis=1))


def _forward(spec: CircuitSpec, angles: np.ndarray, noise: NoiseSetting, keep=None):
    """Run a batch of angle rows; returns (final tensor, {k: state before gate k})."""
    bases = [_sop_basis(g.kind, noise.kind, noise.p) for g in spec.gates]
    t = initial_tensor(spec.n_qubits, angles.shape[0])
    kept = {}
    for k, g in enumerate(spec.gates):
        if keep is not None and k in keep:
            kept[k] = t
        t = _apply(t, _gate_sop(bases[k], angles[:, k]), _axes(spec, g))
    return t, kept


def evaluate_batch(spec: CircuitSpec, xs, theta, noise: NoiseSetting = NOISELESS) -> tuple[np.ndarray, np.ndarray]:
    """Final states (B, d, d) and outputs f (B,) for a batch of inputs."""
    angles = _angle_matrix(spec, xs, theta)
    t, _ = _forward(spec, angles, noise)
    f = _pair(_observable_tensor(spec), t)
    d = spec.dim
    return np.ascontiguousarray(t).reshape(-1, d, d), f


def evaluate(spec: CircuitSpec, x, theta, noise: NoiseSetting = NOISELESS) -> tuple[np.ndarray, float]:
    """Noisy forward pass from |0..0><0..0|; returns (rho, Tr[O rho])."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    rhos, f = evaluate_batch(spec, x, theta, noise)
    return rhos[0], float(f[0])


def predict(spec: CircuitSpec, x, theta, noise: NoiseSetting = NOISELESS) -> float:
    return evaluate(spec, x, theta, noise)[1]


def predict_batch(spec: CircuitSpec, xs, theta, noise: NoiseSetting = NOISELESS) -> np.ndarray:
    return evaluate_batch(spec, xs, theta, noise)[1]


def value_and_grad_batch(spec: CircuitSpec, xs, theta, noise: NoiseSetting = NOISELESS) -> tuple[np.ndarray, np.ndarray]:
    """Outputs f (B,) and parameter-shift Jacobian (B, P) for a batch of inputs.

    The +-pi/2 shifts are evaluated locally at each occurrence: the forward
    states before a gate and the observable propagated backwards through the
    later (noisy) gates are cached, so each occurrence costs one extra gate
    application (the shift difference is linear in the superoperator).
    """
    angles = _angle_matrix(spec, xs, theta)
    trainable = [k for k, g in enumerate(spec.gates) if g.param is not None]
    t, kept = _forward(spec, angles, noise, keep=set(trainable))
    a = _observable_tensor(spec)
    f = _pair(a, t)
    jac = np.zeros((angles.shape[0], spec.n_params))
    if not trainable:
        return f, jac
    bases = [_sop_basis(g.kind, noise.kind, noise.p) for g in spec.gates]
    for k in range(len(spec.gates) - 1, trainable[0] - 1, -1):
        gate = spec.gates[k]
        ax = _axes(spec, gate)
        col = angles[:, k]
        if gate.param is not None:
            diff = _gate_sop(bases[k], col + SHIFT) - _gate_sop(bases[k], col - SHIFT)
            jac[:, gate.param] += 0.5 * _pair(a, _apply(kept[k], diff, ax))
        a = _apply(a, _transpose_sop(_gate_sop(bases[k], col)), ax)
    return f, jac


def value_and_grad(spec: CircuitSpec, x, theta, noise: NoiseSetting = NOISELESS) -> tuple[float, np.ndarray]:
    """f(x, theta) and its parameter-shift gradient (see ``value_and_grad_batch``)."""
    f, jac = value_and_grad_batch(spec, np.asarray(x, dtype=float).reshape(1, -1), theta, noise)
    return float(f[0]), jac[0]


def shifted_states(spec: CircuitSpec, x, theta, noise: NoiseSetting, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """rho(theta) and rho(theta +- h e_i) for every parameter i.

    Returns (rho, plus, minus) with plus/minus of shape (P, d, d). All 2P
    shifted copies are swept through the circuit as one batch; each copy is
    spawned from the unshifted state just before its parameter first occurs.
    Parameters used by no gate get copies of rho.
    """
    angles = spec.angles(x, theta)
    first: dict[int, int] = {}
    for k, g in enumerate(spec.gates):
        if g.param is not None:
            first.setdefault(g.param, k)
    t = initial_tensor(spec.n_qubits)
    row_param = [-1]
    row_sign = [0.0]
    for k, g in enumerate(spec.gates):
        basis = _sop_basis(g.kind, noise.kind, noise.p)
        if g.param is not None and first[g.param] == k:
            t = np.concatenate([t, t[:1], t[:1]])
            row_param += [g.param, g.param]
            row_sign += [1.0, -1.0]
        ax = _axes(spec, g)
        if g.param is None:
            t = _apply(t, _sop_from_basis(basis, angles[k]), ax)
            continue
        rows = np.flatnonzero(np.asarray(row_param) == g.param)
        pre = t[rows]
        t = np.ascontiguousarray(_apply(t, _sop_from_basis(basis, angles[k]), ax))
        shifted = angles[k] + h * np.asarray(row_sign)[rows]
        t[rows] = _apply(pre, _sop_from_basis(basis, shifted), ax)
    d = spec.dim
    t = np.ascontiguousarray(t).reshape(-1, d, d)
    rho = t[0]
    plus = np.repeat(rho[None], spec.n_params, axis=0)
    minus = plus.copy()
    for row, (q, sgn) in enumerate(zip(row_param, row_sign)):
        if q >= 0:
            (plus if sgn > 0 else minus)[q] = t[row]
    return rho, plus, minus


# ---------------------------------------------------------------------------
# statevector engine (noiseless reference)


def _apply_unitary(psi: np.ndarray, u: np.ndarray, wires: tuple[int, ...]) -> np.ndarray:
    k = len(wires)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(tuple(range(k, 2 * k)), wires))
    return np.moveaxis(out, tuple(range(k)), wires)


def _statevector_from_angles(spec: CircuitSpec, angles) -> np.ndarray:
    psi = np.zeros((2,) * spec.n_qubits, dtype=complex)
    psi[(0,) * spec.n_qubits] = 1.0
    for g, a in zip(spec.gates, angles):
        psi = _apply_unitary(psi, gate_matrix(g.kind, a), g.wires)
    return psi.reshape(-1)


def statevector(spec: CircuitSpec, x, theta) -> np.ndarray:
    return _statevector_from_angles(spec, spec.angles(x, theta))


def _sv_expectation(spec: CircuitSpec, angles) -> float:
    psi = _statevector_from_angles(spec, angles)
    return float(np.vdot(psi, spec.observable @ psi).real)


def predict_statevector(spec: CircuitSpec, x, theta) -> float:
    return _sv_expectation(spec, spec.angles(x, theta))


def grad_statevector(spec: CircuitSpec, x, theta) -> tuple[float, np.ndarray]:
    """Parameter-shift gradient by full re-simulation, one shift per occurrence."""
    angles = spec.angles(x, theta)
    f = _sv_expectation(spec, angles)
    grad = np.zeros(spec.n_params)
    for k, g in enumerate(spec.gates):
        if g.param is None:
            continue
        plus, minus = angles.copy(), angles.copy()
        plus[k] += SHIFT
        minus[k] -= SHIFT
        grad[g.param] += 0.5 * (_sv_expectation(spec, plus) - _sv_expectation(spec, minus))
    return f, grad


def gate_unitaries(spec: CircuitSpec, x, theta) -> list[np.ndarray]:
    return [gate_matrix(g.kind, a) for g, a in zip(spec.gates, spec.angles(x, theta))]


__all__ = [
    "Gate", "CircuitSpec", "NoiseSetting", "NOISELESS", "build_hea", "build_ising_qnn",
    "build_circuit", "circuit_from_dict", "relabel", "evaluate", "predict", "value_and_grad",
    "statevector", "predict_statevector", "grad_statevector", "gate_matrix", "gate_unitaries",
    "step_superop", "evaluate_batch", "predict_batch", "value_and_grad_batch", "shifted_states",
]
