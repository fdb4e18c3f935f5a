"""Dense linear algebra over multiqubit states.

Qubits are labelled 1..n and qubit 1 is the most significant bit of the
amplitude index, so ``|01>`` is the vector ``(0, 1, 0, 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

MAX_QUBITS = 14

NORM_TOL = 1e-10
PSD_TOL = 1e-9


class CapacityError(ValueError):
    """Raised when a state would exceed the configured qubit cap."""


class DimensionError(ValueError):
    """Raised on mismatched or malformed dimensions."""


def _check_qubits(n: int) -> int:
    n = int(n)
    if n < 1:
        raise DimensionError(f"n_qubits must be positive, got {n}")
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    return n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        n = _check_qubits(self.n_qubits)
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (2**n,):
            raise DimensionError(f"expected {2**n} amplitudes, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, normalize: bool = True) -> "PureState":
        vec = np.asarray(vec, dtype=complex).ravel()
        n = int(round(np.log2(vec.size)))
        if 2**n != vec.size:
            raise DimensionError(f"length {vec.size} is not a power of two")
        if normalize:
            vec = vec / np.linalg.norm(vec)
        return cls(n, vec)

    @classmethod
    def basis(cls, bits: str) -> "PureState":
        """Computational basis state from a bit string such as ``"0110"``."""
        vec = np.zeros(2 ** len(bits), dtype=complex)
        vec[int(bits, 2)] = 1.0
        return cls(len(bits), vec)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def projector(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        n = _check_qubits(self.n_qubits)
        m = _frozen(self.matrix)
        d = 2**n
        if m.shape != (d, d):
            raise DimensionError(f"expected a {d}x{d} matrix, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, mat) -> "DensityMatrix":
        mat = np.asarray(mat, dtype=complex)
        n = int(round(np.log2(mat.shape[0])))
        return cls(n, mat)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(n, np.eye(2**n) / 2**n)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


State = Union[PureState, DensityMatrix]


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Convex mixture of pure states, ``sum_m w_m |s_m><s_m|``."""

    weights: np.ndarray
    members: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True).ravel()
        members = tuple(self.members)
        if not members:
            raise ValueError("ensemble needs at least one member")
        if w.shape != (len(members),):
            raise DimensionError("one weight per member is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > NORM_TOL:
            raise ValueError("weights must lie on the probability simplex")
        ns = {m.n_qubits for m in members}
        if len(ns) != 1:
            raise DimensionError("ensemble members must share n_qubits")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "members", members)

    @property
    def n_qubits(self) -> int:
        return self.members[0].n_qubits


@dataclass(frozen=True)
class ShotEstimate:
    estimate: float
    shots: int
    seed: int


def tensor(a: PureState, b: PureState) -> PureState:
    """Product state with ``a`` on the leading (most significant) qubits."""
    n = a.n_qubits + b.n_qubits
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    return PureState(n, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[PureState]) -> PureState:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def to_density(e: Ensemble) -> DensityMatrix:
    vecs = np.stack([m.amplitudes for m in e.members], axis=1)
    mat = (vecs * e.weights) @ vecs.conj().T
    return DensityMatrix(e.n_qubits, 0.5 * (mat + mat.conj().T))


def reduced_density(s: State, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace over every qubit not listed in ``keep`` (1-based labels).

    The kept qubits appear in ascending label order in the result.
    """
    n = s.n_qubits
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one qubit")
    if keep[0] < 1 or keep[-1] > n:
        raise IndexError(f"qubit index out of range 1..{n}: {keep}")
    kept = [k - 1 for k in keep]
    traced = [q for q in range(n) if q not in kept]
    dk = 2 ** len(kept)
    if isinstance(s, PureState):
        psi = s.amplitudes.reshape((2,) * n).transpose(kept + traced).reshape(dk, -1)
        red = psi @ psi.conj().T
    else:
        rho = s.matrix.reshape((2,) * (2 * n))
        rows = kept + traced
        cols = [q + n for q in kept] + [q + n for q in traced]
        dt = 2 ** len(traced)
        rho = rho.transpose(rows + cols).reshape(dk, dt, dk, dt)
        red = np.einsum("ajbj->ab", rho)
    red = 0.5 * (red + red.conj().T)
    return DensityMatrix(len(kept), red)


def purity(rho: State) -> float:
    """``tr(rho^2)``; for Hermitian rho this is the squared Frobenius norm."""
    if isinstance(rho, PureState):
        return 1.0
    m = rho.matrix
    return float(np.vdot(m, m).real)


def fidelity_pure(a: PureState, b: PureState) -> float:
    if a.n_qubits != b.n_qubits:
        raise DimensionError("states act on different numbers of qubits")
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(1.0, f))


def hs_distance_sq(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dim != sigma.dim:
        raise DimensionError("density matrices have different dimensions")
    diff = rho.matrix - sigma.matrix
    return float(max(0.0, np.vdot(diff, diff).real))


def hermitian_power(mat: np.ndarray, m: int) -> np.ndarray:
    """``mat**m`` for Hermitian ``mat``.

    Plain repeated multiplication up to m = 8, eigendecomposition above.
    """
    m = int(m)
    if m < 1:
        raise ValueError("matrix power must be >= 1")
    if m <= 8:
        out = mat
        for _ in range(m - 1):
            out = out @ mat
    else:
        vals, vecs = np.linalg.eigh(mat)
        out = (vecs * vals**m) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def power_overlap(rho: DensityMatrix, m: int, phi: PureState) -> tuple[float, float]:
    """Return ``(<phi|rho^m|phi>, tr(rho^m))``."""
    if int(m) < 1:
        raise ValueError("m must be a positive integer")
    if rho.dim != phi.dim:
        raise DimensionError("state and density matrix dimensions differ")
    pm = hermitian_power(rho.matrix, m)
    num = float(np.vdot(phi.amplitudes, pm @ phi.amplitudes).real)
    den = float(np.trace(pm).real)
    return max(num, 0.0), den


def bernoulli_estimate(p: float, shots: int, seed: int) -> ShotEstimate:
    """Sample mean of ``shots`` seeded Bernoulli(p) outcomes."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(seed)
    hits = int(np.count_nonzero(rng.random(shots) < p))
    return ShotEstimate(hits / shots, int(shots), int(seed))


def random_density(n: int, rank: int | None = None, rng=None) -> DensityMatrix:
    """Random density matrix from a Ginibre ensemble (test helper)."""
    rng = np.random.default_rng(rng)
    d = 2**n
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    mat = g @ g.conj().T
    return DensityMatrix(n, mat / np.trace(mat).real)


def random_unitary(d: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def qubit_labels(n: int) -> Sequence[int]:
    return range(1, n + 1)
