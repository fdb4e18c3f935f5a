"""Parameterized circuits: rotations, the two-qubit block Q, local layers and pools.

Rotation convention: ``rz(a) = exp(+i a Z / 2)`` and ``ry(b) = exp(+i b Y / 2)``.

Parameter slots are flat vectors. A local layer W uses qubit-major slots; for
qubit i (1-based) in FULL3 mode the slots ``3(i-1) + (0, 1, 2)`` drive
``rz, ry, rz`` in application order, in REDUCED2 mode the slots
``2(i-1) + (0, 1)`` drive ``ry, rz``. An entangling circuit ``W(a) Q_l W(g)``
stores the slots of ``W(g)`` first, then three slots per Q block in schedule
order, then the slots of ``W(a)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .qcore import MAX_QUBITS, CapacityError, DimensionError, PureState

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)

CNOT_12 = np.kron(_P0, _I2) + np.kron(_P1, _X)
CNOT_21 = np.kron(_I2, _P0) + np.kron(_X, _P1)
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]

# number of entangling layers where the pair tables are written out explicitly
TABULATED_LAYERS = {2: 1, 4: 3, 6: 6, 8: 9}


class GateKind(str, enum.Enum):
    RZ = "RZ"
    RY = "RY"
    CNOT = "CNOT"
    Q = "Q"


class WMode(str, enum.Enum):
    FULL3 = "FULL3"
    REDUCED2 = "REDUCED2"

    @property
    def angles_per_qubit(self) -> int:
        return 3 if self is WMode.FULL3 else 2


def rz(alpha: float) -> np.ndarray:
    ph = np.exp(0.5j * alpha)
    return np.array([[ph, 0], [0, ph.conjugate()]], dtype=complex)


def ry(beta: float) -> np.ndarray:
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    return np.array([[c, s], [-s, c]], dtype=complex)


def q_gate(theta1: float, theta2: float, theta3: float) -> np.ndarray:
    """Two-qubit block ``C21 [rz(t1) x ry(t2)] C12 [1 x ry(t3)] C21``."""
    return (
        CNOT_21
        @ np.kron(rz(theta1), ry(theta2))
        @ CNOT_12
        @ np.kron(_I2, ry(theta3))
        @ CNOT_21
    )


@dataclass(frozen=True)
class CanonicalQ:
    """Q angles plus the fixed single-qubit wrappers realising exp(iH).

    The full unitary is ``post @ q_gate(*theta) @ pre``.
    """

    theta: tuple[float, float, float]
    pre: np.ndarray = field(repr=False)
    post: np.ndarray = field(repr=False)

    def matrix(self) -> np.ndarray:
        return self.post @ q_gate(*self.theta) @ self.pre


def q_from_canonical(theta_x: float, theta_y: float, theta_z: float) -> CanonicalQ:
    """Map ``exp(i(tx XX + ty YY + tz ZZ))`` onto a wrapped Q block.

    With the +i rotation convention the wrapper rotations are
    ``rz(+pi/2)`` on the first qubit before Q and ``rz(-pi/2)`` on the second
    qubit after it; equality holds up to a global phase.
    """
    theta = (
        2 * theta_z - np.pi / 2,
        np.pi / 2 - 2 * theta_x,
        2 * theta_y - np.pi / 2,
    )
    pre = np.kron(rz(np.pi / 2), _I2)
    post = np.kron(_I2, rz(-np.pi / 2))
    return CanonicalQ(theta, pre, post)


def canonical_unitary(theta_x: float, theta_y: float, theta_z: float) -> np.ndarray:
    """``exp(iH)`` for ``H = tx XX + ty YY + tz ZZ``, via its Bell-basis eigenvalues."""
    # H is diagonal in the Bell basis
    s2 = 1 / np.sqrt(2)
    bell = np.array(
        [[s2, 0, 0, s2], [s2, 0, 0, -s2], [0, s2, s2, 0], [0, s2, -s2, 0]], dtype=complex
    ).T
    ev = np.array(
        [
            theta_x - theta_y + theta_z,
            -theta_x + theta_y + theta_z,
            theta_x + theta_y - theta_z,
            -theta_x - theta_y - theta_z,
        ]
    )
    return (bell * np.exp(1j * ev)) @ bell.conj().T


# ---------------------------------------------------------------- scheduling


@dataclass(frozen=True)
class PairSchedule:
    n_qubits: int
    layers: tuple[tuple[tuple[int, int], ...], ...]

    def __len__(self) -> int:
        return len(self.layers)


def schedule_length(n: int) -> int:
    if n in TABULATED_LAYERS:
        return TABULATED_LAYERS[n]
    return 3 * n // 2 - 1 if n % 2 == 0 else 3 * (n - 1) // 2


def _distance_layers(n: int, c: int) -> list[list[tuple[int, int]]]:
    # pairs at distance c form chains i, i+c, i+2c, ...; alternate along each chain
    pairs = [(i, i + c) for i in range(1, n - c + 1)]
    even = [p for p in pairs if ((p[0] - 1) // c) % 2 == 0]
    odd = [p for p in pairs if ((p[0] - 1) // c) % 2 == 1]
    return [layer for layer in (even, odd) if layer]


def _base_layers(n: int) -> list[list[tuple[int, int]]]:
    if n == 2:
        return [[(1, 2)]]
    if n % 2 == 0:
        first, second = _distance_layers(n, 1)
        layers = [first, [(1, n)] + second]
        for c in range(2, n - 1):
            layers += _distance_layers(n, c)
        return layers
    layers = []
    for c in range(1, n):
        layers += _distance_layers(n, c)
    return layers


def pair_schedule(n: int) -> PairSchedule:
    """Group all qubit pairs into layers of disjoint pairs.

    Layer 1 is ``(1,2),(3,4),...``; for even n layer 2 is
    ``(1,n),(2,3),(4,5),...``. Remaining pairs are grouped by index distance,
    each distance split into at most two disjoint layers. When the target
    layer count exceeds that grouping, the largest later layer is halved.
    """
    n = int(n)
    if n < 2:
        raise ValueError("a pair schedule needs at least two qubits")
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    layers = _base_layers(n)
    target = schedule_length(n)
    while len(layers) < target:
        idx = max(range(2, len(layers)), key=lambda i: (len(layers[i]), i))
        layer = layers[idx]
        half = len(layer) // 2
        layers[idx : idx + 1] = [layer[:half], layer[half:]]
    return PairSchedule(n, tuple(tuple(sorted(layer)) for layer in layers))


# ---------------------------------------------------------------- circuits


@dataclass(frozen=True)
class GateSpec:
    kind: GateKind
    targets: tuple[int, ...]
    param_slots: tuple[int, ...] = ()


# op codes of the compiled primitive program
_RZ, _RY, _CX = 0, 1, 2


@dataclass(frozen=True, eq=False)
class ParamCircuit:
    n_qubits: int
    layers: tuple[tuple[GateSpec, ...], ...]
    pool_tag: str
    pool_index: int
    w_mode: WMode
    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        slots: list[int] = []
        for layer in self.layers:
            seen: set[int] = set()
            for g in layer:
                if any(t < 1 or t > self.n_qubits for t in g.targets):
                    raise ValueError(f"gate target out of range: {g}")
                if len(set(g.targets)) != len(g.targets) or seen & set(g.targets):
                    raise ValueError("gates within a layer must act on disjoint qubits")
                seen |= set(g.targets)
                slots += g.param_slots
        if len(set(slots)) != len(slots):
            raise ValueError("parameter slots must be unique")

    @cached_property
    def num_params(self) -> int:
        return sum(len(g.param_slots) for layer in self.layers for g in layer)

    @property
    def descriptor(self) -> dict:
        return {"pool": self.pool_tag, "index": self.pool_index, "pairs": [list(p) for p in self.pairs]}

    @cached_property
    def program(self) -> "_Program":
        return _Program.compile(self)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "pool": self.pool_tag,
            "index": self.pool_index,
            "w_mode": self.w_mode.value,
            "num_params": self.num_params,
            "pairs": [list(p) for p in self.pairs],
            "layers": [
                [
                    {"kind": g.kind.value, "targets": list(g.targets), "slots": list(g.param_slots)}
                    for g in layer
                ]
                for layer in self.layers
            ],
        }


def param_count(c: ParamCircuit) -> int:
    return c.num_params


def _local_layers(n: int, w_mode: WMode, offset: int) -> list[tuple[GateSpec, ...]]:
    k = w_mode.angles_per_qubit
    kinds = (GateKind.RZ, GateKind.RY, GateKind.RZ) if k == 3 else (GateKind.RY, GateKind.RZ)
    return [
        tuple(GateSpec(kind, (q,), (offset + k * (q - 1) + a,)) for q in range(1, n + 1))
        for a, kind in enumerate(kinds)
    ]


def local_circuit(n: int, w_mode: WMode = WMode.FULL3) -> ParamCircuit:
    """The single local layer ``W`` (pool P1)."""
    return ParamCircuit(n, tuple(_local_layers(n, WMode(w_mode), 0)), "P1", 0, WMode(w_mode))


def entangling_circuit(
    n: int, pairs: Sequence[tuple[int, int]], index: int = 1, w_mode: WMode = WMode.FULL3
) -> ParamCircuit:
    """``W(alpha) Q_pairs W(gamma)`` with one Q block per disjoint pair."""
    w_mode = WMode(w_mode)
    nw = n * w_mode.angles_per_qubit
    q_layer = tuple(
        GateSpec(GateKind.Q, (j, k), (nw + 3 * i, nw + 3 * i + 1, nw + 3 * i + 2))
        for i, (j, k) in enumerate(pairs)
    )
    layers = _local_layers(n, w_mode, 0) + [q_layer] + _local_layers(n, w_mode, nw + 3 * len(pairs))
    return ParamCircuit(n, tuple(layers), "P2", index, w_mode, tuple(tuple(p) for p in pairs))


@dataclass(frozen=True)
class CircuitPool:
    p1: ParamCircuit
    p2: tuple[ParamCircuit, ...]
    schedule: PairSchedule

    @property
    def candidates(self) -> tuple[ParamCircuit, ...]:
        return (self.p1,) + self.p2


def build_pool(n: int, w_mode: WMode = WMode.FULL3) -> CircuitPool:
    sched = pair_schedule(n)
    p1 = local_circuit(n, w_mode)
    p2 = tuple(entangling_circuit(n, layer, l + 1, w_mode) for l, layer in enumerate(sched.layers))
    return CircuitPool(p1, p2, sched)


def gate_matrix(g: GateSpec, params: Sequence[float]) -> np.ndarray:
    vals = [params[s] for s in g.param_slots]
    if g.kind is GateKind.RZ:
        return rz(vals[0])
    if g.kind is GateKind.RY:
        return ry(vals[0])
    if g.kind is GateKind.CNOT:
        return CNOT_12
    return q_gate(*vals)


# ---------------------------------------------------------------- simulation


class _Program:
    """Primitive gate list with precomputed CNOT permutations."""

    def __init__(self, n: int, ops: list[tuple[int, int, int, int]]):
        self.n = n
        self.ops = ops
        idx = np.arange(2**n)
        self.perms = {}
        for code, a, b, _ in ops:
            if code == _CX and (a, b) not in self.perms:
                cbit = 1 << (n - 1 - a)
                tbit = 1 << (n - 1 - b)
                self.perms[(a, b)] = np.where(idx & cbit, idx ^ tbit, idx)

    @classmethod
    def compile(cls, c: ParamCircuit) -> "_Program":
        ops: list[tuple[int, int, int, int]] = []
        for layer in c.layers:
            for g in layer:
                t = [q - 1 for q in g.targets]
                if g.kind is GateKind.RZ:
                    ops.append((_RZ, t[0], -1, g.param_slots[0]))
                elif g.kind is GateKind.RY:
                    ops.append((_RY, t[0], -1, g.param_slots[0]))
                elif g.kind is GateKind.CNOT:
                    ops.append((_CX, t[0], t[1], -1))
                else:
                    j, k = t
                    s1, s2, s3 = g.param_slots
                    ops += [
                        (_CX, k, j, -1),
                        (_RY, k, -1, s3),
                        (_CX, j, k, -1),
                        (_RZ, j, -1, s1),
                        (_RY, k, -1, s2),
                        (_CX, k, j, -1),
                    ]
        return cls(c.n_qubits, ops)

    def _view(self, psi: np.ndarray, q: int) -> np.ndarray:
        return psi.reshape(psi.shape[0], 2**q, 2, 2 ** (self.n - q - 1))

    def _rot(self, psi: np.ndarray, code: int, q: int, ang: np.ndarray) -> None:
        v = self._view(psi, q)
        if code == _RZ:
            ph = np.exp(0.5j * ang)[:, None, None]
            v[:, :, 0, :] *= ph
            v[:, :, 1, :] *= ph.conj()
        else:
            c = np.cos(ang / 2)[:, None, None]
            s = np.sin(ang / 2)[:, None, None]
            x0 = v[:, :, 0, :].copy()
            x1 = v[:, :, 1, :]
            v[:, :, 0, :] = c * x0 + s * x1
            v[:, :, 1, :] = c * x1 - s * x0

    def run(self, params: np.ndarray, psi: np.ndarray) -> np.ndarray:
        psi = np.array(psi, dtype=complex, copy=True)
        for code, a, b, slot in self.ops:
            if code == _CX:
                psi = psi[:, self.perms[(a, b)]]
            else:
                self._rot(psi, code, a, params[:, slot])
        return psi

    def adjoint(self, params: np.ndarray, final: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Gradient of a real cost given ``lam = dC/d(conj psi_final)``."""
        phi = np.array(final, dtype=complex, copy=True)
        mu = np.array(lam, dtype=complex, copy=True)
        grad = np.zeros(params.shape, dtype=float)
        for code, a, b, slot in reversed(self.ops):
            if code == _CX:
                perm = self.perms[(a, b)]
                phi = phi[:, perm]
                mu = mu[:, perm]
                continue
            vp = self._view(phi, a)
            vm = self._view(mu, a)
            m0p0 = np.einsum("bij,bij->b", vm[:, :, 0, :].conj(), vp[:, :, 0, :])
            m1p1 = np.einsum("bij,bij->b", vm[:, :, 1, :].conj(), vp[:, :, 1, :])
            if code == _RZ:
                grad[:, slot] += -(m0p0 - m1p1).imag
            else:
                m0p1 = np.einsum("bij,bij->b", vm[:, :, 0, :].conj(), vp[:, :, 1, :])
                m1p0 = np.einsum("bij,bij->b", vm[:, :, 1, :].conj(), vp[:, :, 0, :])
                grad[:, slot] += (m0p1 - m1p0).real
            neg = -params[:, slot]
            self._rot(phi, code, a, neg)
            self._rot(mu, code, a, neg)
        return grad


def zero_state(n: int, batch: int = 1) -> np.ndarray:
    psi = np.zeros((batch, 2**n), dtype=complex)
    psi[:, 0] = 1.0
    return psi


def simulate(c: ParamCircuit, params: np.ndarray, init: np.ndarray | None = None) -> np.ndarray:
    """Batched forward pass; ``params`` has shape (B, P), result (B, 2**n)."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[1] != c.num_params:
        raise DimensionError(f"expected {c.num_params} parameters, got {params.shape[1]}")
    if init is None:
        init = zero_state(c.n_qubits, params.shape[0])
    return c.program.run(params, init)


def apply(c: ParamCircuit, params: Sequence[float], state: PureState | None = None) -> PureState:
    """Apply the circuit gate by gate; the input defaults to ``|0...0>``."""
    params = np.asarray(params, dtype=float).ravel()
    if params.size != c.num_params:
        raise DimensionError(f"expected {c.num_params} parameters, got {params.size}")
    if state is None:
        init = zero_state(c.n_qubits)
    else:
        if state.n_qubits != c.n_qubits:
            raise DimensionError("state and circuit act on different numbers of qubits")
        init = state.amplitudes[None, :]
    out = c.program.run(params[None, :], init)[0]
    return PureState.from_vector(out, normalize=False)


def circuit_unitary(c: ParamCircuit, params: Sequence[float]) -> np.ndarray:
    """Dense unitary of a bound circuit, column by column (small n only)."""
    d = 2**c.n_qubits
    params = np.asarray(params, dtype=float).ravel()
    batch = np.broadcast_to(params, (d, params.size))
    return c.program.run(batch, np.eye(d, dtype=complex)).T
