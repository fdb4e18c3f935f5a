"""Variational k-separability detection with parameterized quantum circuits."""

from .circuits import (
    CircuitPool,
    ParamCircuit,
    WMode,
    apply,
    build_pool,
    canonical_unitary,
    entangling_circuit,
    local_circuit,
    pair_schedule,
    q_from_canonical,
    q_gate,
    schedule_length,
)
from .detect import (
    AdaptiveConfig,
    EntanglementGraph,
    SeparabilityVerdict,
    Status,
    algorithm1,
    algorithm2,
    detect_noisy_pure,
    detect_pure,
    entanglement_graph,
    k_from_graph,
)
from .optim import OptimizerConfig, OptResult, minimize
from .qcore import DensityMatrix, Ensemble, PureState, purity, reduced_density

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig",
    "CircuitPool",
    "DensityMatrix",
    "Ensemble",
    "EntanglementGraph",
    "OptResult",
    "OptimizerConfig",
    "ParamCircuit",
    "PureState",
    "SeparabilityVerdict",
    "Status",
    "WMode",
    "algorithm1",
    "algorithm2",
    "apply",
    "build_pool",
    "canonical_unitary",
    "detect_noisy_pure",
    "detect_pure",
    "entangling_circuit",
    "entanglement_graph",
    "k_from_graph",
    "local_circuit",
    "minimize",
    "pair_schedule",
    "purity",
    "q_from_canonical",
    "q_gate",
    "reduced_density",
    "schedule_length",
]
