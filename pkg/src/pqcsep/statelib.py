"""Reference states, global depolarizing noise and closed-form checks."""

from __future__ import annotations

import enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .qcore import DensityMatrix, PureState, tensor_all

BELL = PureState(2, np.array([0, 1, 1, 0]) / np.sqrt(2))


def ghz(n: int) -> PureState:
    if n < 2:
        raise ValueError("GHZ states need at least two qubits")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState(n, amps)


def bell_chain(pairs: int) -> PureState:
    """``(|01> + |10>)/sqrt(2)`` on each of the qubit pairs (1,2), (3,4), ..."""
    if pairs < 1:
        raise ValueError("need at least one pair")
    return tensor_all([BELL] * pairs)


def depolarize_global(psi: PureState, q: float) -> DensityMatrix:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"noise strength must lie in [0, 1], got {q}")
    d = psi.dim
    mat = (1 - q) * np.outer(psi.amplitudes, psi.amplitudes.conj())
    mat[np.diag_indices(d)] += q / d
    return DensityMatrix(psi.n_qubits, mat)


def rho3(q: float) -> DensityMatrix:
    """Noisy three-qubit GHZ state; fully separable exactly for q >= 4/5."""
    return depolarize_global(ghz(3), q)


def rho4(q: float) -> DensityMatrix:
    """``rho3(q)`` with a fourth qubit in ``|0>``."""
    r3 = rho3(q).matrix
    return DensityMatrix(4, np.kron(r3, np.diag([1.0, 0.0])))


def rho_g(q: float, pairs: int = 5) -> DensityMatrix:
    return depolarize_global(bell_chain(pairs), q)


def oracle_infidelity(q: float, m: int, n_qubits: int = 10) -> float:
    """``|1 - <psi|rho^m|psi> / tr rho^m|`` for a globally depolarized pure state.

    Only the spectrum matters: one eigenvalue ``(1-q) + q/d`` on the pure
    state and ``d - 1`` copies of ``q/d``.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if m < 1:
        raise ValueError("m must be positive")
    d = 2**n_qubits
    a = (1 - q) + q / d
    b = q / d
    # 1 - a^m / (a^m + (d-1) b^m), rearranged to avoid cancellation
    tail = (d - 1) * (b / a) ** m
    return abs(tail / (1.0 + tail))


def haar_qubit(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=2) + 1j * rng.normal(size=2)
    return z / np.linalg.norm(z)


def random_product_state(n: int, seed: int) -> PureState:
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return tensor_all([PureState(1, haar_qubit(rng)) for _ in range(n)])


class StateFamily(str, enum.Enum):
    GHZ = "GHZ"
    BELL_CHAIN = "BELL_CHAIN"
    PRODUCT_RANDOM = "PRODUCT_RANDOM"
    CUSTOM = "CUSTOM"


class NamedStateSpec(BaseModel):
    """JSON vocabulary for generated states.

    A present ``q`` turns the pure state into its globally depolarized density
    matrix. ``CUSTOM`` takes explicit ``amplitudes`` as ``[re, im]`` pairs.
    """

    model_config = ConfigDict(extra="forbid")

    family: StateFamily
    n_qubits: Optional[int] = Field(default=None, ge=1)
    pairs: Optional[int] = Field(default=None, ge=1)
    q: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    seed: int = 0
    amplitudes: Optional[list[tuple[float, float]]] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.family is StateFamily.BELL_CHAIN:
            if self.pairs is None:
                if self.n_qubits is None or self.n_qubits % 2:
                    raise ValueError("BELL_CHAIN needs 'pairs' or an even 'n_qubits'")
                self.pairs = self.n_qubits // 2
            elif self.n_qubits is not None and self.n_qubits != 2 * self.pairs:
                raise ValueError("n_qubits must equal 2 * pairs")
            self.n_qubits = 2 * self.pairs
        elif self.family is StateFamily.CUSTOM:
            if not self.amplitudes:
                raise ValueError("CUSTOM states need 'amplitudes'")
            n = int(round(np.log2(len(self.amplitudes))))
            if 2**n != len(self.amplitudes) or (self.n_qubits not in (None, n)):
                raise ValueError("amplitude count must be 2**n_qubits")
            self.n_qubits = n
        elif self.n_qubits is None:
            raise ValueError(f"{self.family.value} needs 'n_qubits'")
        if self.family is StateFamily.GHZ and self.n_qubits < 2:
            raise ValueError("GHZ needs n_qubits >= 2")
        return self

    def pure_state(self) -> PureState:
        if self.family is StateFamily.GHZ:
            return ghz(self.n_qubits)
        if self.family is StateFamily.BELL_CHAIN:
            return bell_chain(self.pairs)
        if self.family is StateFamily.PRODUCT_RANDOM:
            return random_product_state(self.n_qubits, self.seed)
        vec = np.array([complex(re, im) for re, im in self.amplitudes])
        return PureState.from_vector(vec)

    def build(self):
        psi = self.pure_state()
        return psi if self.q is None else depolarize_global(psi, self.q)
