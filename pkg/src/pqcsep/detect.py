"""Separability detection from optimal circuits.

Four pipelines share one result type:

* :func:`detect_pure` reconstructs a pure state with the local circuit first
  and then each entangling circuit; the structure of the first circuit that
  fits reveals the factorization.
* :func:`detect_noisy_pure` does the same against normalized powers of a noisy
  density matrix, sweeping the power upward.
* :func:`algorithm1` grows a fully separable ensemble until it matches a mixed
  state in Hilbert-Schmidt distance.
* :func:`algorithm2` grows an ensemble of entangling-circuit states and reads
  k off each member.

Failure to fit is reported as INCONCLUSIVE and never as a separability claim.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .circuits import CircuitPool, ParamCircuit, WMode, apply, build_pool, local_circuit
from .optim import (
    TWO_PI,
    EnsembleObjective,
    OptimizerConfig,
    OptResult,
    ensemble_objective,
    minimize,
    vqsr_noisy_objective,
    vqsr_objective,
)
from .qcore import DensityMatrix, PureState, purity, reduced_density

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    DETECTED = "DETECTED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class EntanglementGraph:
    n: int
    edges: tuple[tuple[int, int], ...]
    pair_purities: tuple[tuple[int, int, float], ...] = ()


@dataclass
class SeparabilityVerdict:
    status: Status
    final_cost: float
    k: Optional[int] = None
    partition: Optional[list[list[int]]] = None
    winning_circuit: Optional[dict] = None
    optimal_params: Optional[list[float]] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def detected(self) -> bool:
        return self.status is Status.DETECTED

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "k": self.k,
            "partition": self.partition,
            "winning_circuit": self.winning_circuit,
            "final_cost": self.final_cost,
            "optimal_params": self.optimal_params,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class AdaptiveConfig:
    epsilon: float = 1e-4
    s_max: Optional[int] = None  # None means n**2
    purity_tol: float = 1e-4
    m_max: int = 8
    optimizer: OptimizerConfig = OptimizerConfig()
    include_p1_member_per_round: bool = False
    w_mode: WMode = WMode.FULL3

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.s_max is not None and self.s_max < 1:
            raise ValueError("s_max must be at least 1")
        if not 0 < self.purity_tol < 0.5:
            raise ValueError("purity_tol must lie in (0, 0.5)")
        if self.m_max < 1:
            raise ValueError("m_max must be at least 1")

    @property
    def opt(self) -> OptimizerConfig:
        return replace(self.optimizer, threshold=self.epsilon)

    def rounds(self, n: int) -> int:
        return self.s_max if self.s_max is not None else n * n

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w_mode"] = WMode(self.w_mode).value
        return d


# ------------------------------------------------------------------ graphs


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller label as root so components are stable
            lo, hi = min(ra, rb), max(ra, rb)
            self.parent[hi] = lo


def entanglement_graph(
    reconstructed: PureState, winner: ParamCircuit, params, purity_tol: float = 1e-4
) -> EntanglementGraph:
    """Edge (j, k) for every entangling pair whose qubit j has a mixed marginal."""
    if winner.pool_tag != "P2":
        raise ValueError("only entangling circuits carry pair structure")
    edges = []
    purities = []
    for j, k in winner.pairs:
        p = purity(reduced_density(reconstructed, [j]))
        purities.append((j, k, p))
        if p < 1 - purity_tol:
            edges.append((j, k))
    return EntanglementGraph(reconstructed.n_qubits, tuple(edges), tuple(purities))


def k_from_graph(g: EntanglementGraph) -> tuple[int, list[list[int]]]:
    uf = _UnionFind(range(1, g.n + 1))
    for a, b in g.edges:
        uf.union(a, b)
    blocks: dict[int, list[int]] = {}
    for v in range(1, g.n + 1):
        blocks.setdefault(uf.find(v), []).append(v)
    partition = sorted(blocks.values(), key=lambda b: b[0])
    return len(partition), partition


def _singletons(n: int) -> list[list[int]]:
    return [[i] for i in range(1, n + 1)]


def _params_list(x) -> list[float]:
    return [float(v) for v in np.asarray(x, dtype=float)]


# ------------------------------------------------------------------ pure states


def _scan(
    make_obj: Callable[[ParamCircuit], object],
    pool: CircuitPool,
    cfg: AdaptiveConfig,
    seed_key: tuple,
    trace: Optional[list] = None,
    stage: str = "",
) -> tuple[Optional[ParamCircuit], Optional[OptResult], list[dict]]:
    costs = []
    for cand in pool.candidates:
        res = minimize(
            make_obj(cand), cfg.opt, seed_key=(cand.pool_index, *seed_key), record_trace=trace is not None
        )
        if trace is not None:
            label = f"{stage}{cand.pool_tag}-{cand.pool_index}"
            trace.extend((label, r, it, c) for r, it, c in res.trace)
        costs.append({"pool": cand.pool_tag, "index": cand.pool_index, "cost": res.best_cost})
        log.info("candidate %s%d best cost %.3e", cand.pool_tag, cand.pool_index, res.best_cost)
        if res.best_cost < cfg.epsilon:
            return cand, res, costs
    return None, None, costs


def _structure_verdict(
    winner: ParamCircuit, res: OptResult, cfg: AdaptiveConfig, costs: list, target=None
) -> SeparabilityVerdict:
    n = winner.n_qubits
    diag: dict = {"candidate_costs": costs}
    if winner.pool_tag == "P1":
        k, partition = n, _singletons(n)
        diag["pair_purities"] = []
    else:
        recon = apply(winner, res.best_params)
        graph = entanglement_graph(recon, winner, res.best_params, cfg.purity_tol)
        k, partition = k_from_graph(graph)
        diag["pair_purities"] = [
            {"pair": [j, kk], "purity": p} for j, kk, p in graph.pair_purities
        ]
        if target is not None:
            check = [
                {"pair": [j, kk], "purity": purity(reduced_density(target, [j]))}
                for j, kk, _ in graph.pair_purities
            ]
            diag["target_pair_purities"] = check
            gap = max(abs(a["purity"] - b["purity"]) for a, b in zip(check, diag["pair_purities"]))
            log.info("reconstructed vs target purity gap %.2e", gap)
    return SeparabilityVerdict(
        Status.DETECTED,
        res.best_cost,
        k,
        partition,
        winner.descriptor,
        _params_list(res.best_params),
        diag,
    )


def detect_pure(
    psi: PureState, cfg: AdaptiveConfig = AdaptiveConfig(), trace: Optional[list] = None
) -> SeparabilityVerdict:
    """Try P1, then each P2 circuit in order; the first fit below epsilon decides.

    ``trace``, when given, collects ``(stage, restart, iteration, cost)`` rows.
    """
    if psi.n_qubits < 2:
        raise ValueError("separability needs at least two qubits")
    pool = build_pool(psi.n_qubits, cfg.w_mode)
    winner, res, costs = _scan(lambda c: vqsr_objective(psi, c), pool, cfg, (), trace)
    if winner is None:
        return SeparabilityVerdict(
            Status.INCONCLUSIVE, min(c["cost"] for c in costs), diagnostics={"candidate_costs": costs}
        )
    return _structure_verdict(winner, res, cfg, costs, target=psi)


def power_cost_floor(rho: DensityMatrix, m: int) -> float:
    """Lowest reachable noisy cost at power m: ``1 - sqrt(l_max^m / tr rho^m)``."""
    vals = np.clip(rho.eigvalsh(), 0.0, None)
    top = vals[-1]
    ratio = 1.0 / float(np.sum((vals / top) ** m))
    return max(0.0, 1.0 - np.sqrt(ratio))


def detect_noisy_pure(
    rho_noise: DensityMatrix, cfg: AdaptiveConfig = AdaptiveConfig(), trace: Optional[list] = None
) -> SeparabilityVerdict:
    """Sweep m = 1..m_max and return the first detection.

    A power is skipped without optimizing when the spectrum alone rules out a
    cost below epsilon.
    """
    n = rho_noise.n_qubits
    if n < 2:
        raise ValueError("separability needs at least two qubits")
    pool = build_pool(n, cfg.w_mode)
    sweep = []
    best_cost = np.inf
    for m in range(1, cfg.m_max + 1):
        floor = power_cost_floor(rho_noise, m)
        if floor >= cfg.epsilon:
            sweep.append({"m": m, "skipped": True, "cost_floor": floor})
            best_cost = min(best_cost, floor)
            continue
        key = (m,) if m > 1 else ()
        winner, res, costs = _scan(
            lambda c: vqsr_noisy_objective(rho_noise, m, c), pool, cfg, key, trace, f"m={m}/"
        )
        sweep.append({"m": m, "skipped": False, "cost_floor": floor, "candidate_costs": costs})
        best_cost = min(best_cost, min(c["cost"] for c in costs))
        if winner is not None:
            verdict = _structure_verdict(winner, res, cfg, costs)
            verdict.diagnostics["m"] = m
            verdict.diagnostics["m_sweep"] = sweep
            return verdict
    return SeparabilityVerdict(Status.INCONCLUSIVE, float(best_cost), diagnostics={"m_sweep": sweep})


# ------------------------------------------------------------------ mixed states


def _warm_init(prev: Optional[np.ndarray], prev_obj: Optional[EnsembleObjective], obj: EnsembleObjective):
    """Keep the previous optimum and append new members.

    Restart 0 gives new members a negligible weight so the round starts at the
    previous cost; the other restarts start new weights at the current minimum.
    """
    if prev is None:
        return None
    n_old = len(prev_obj.members)

    def init(r: int, rng: np.random.Generator):
        x = rng.uniform(0.0, TWO_PI, obj.arity)
        x[: prev_obj.n_slots] = prev[: prev_obj.n_slots]
        raws = prev[prev_obj.n_slots :]
        x[obj.n_slots : obj.n_slots + n_old] = raws
        x[obj.n_slots + n_old :] = raws.min() - (40.0 if r == 0 else 0.0)
        return x

    return init


def _bounds(n: int) -> dict:
    return {
        "caratheodory_members": 4**n,
        "caratheodory_parameters": 4**n * (1 + 2 * n),
        "fixed_2n_members": 2**n,
        "fixed_2n_parameters": 2**n * (1 + 2 * n),
    }


def _adaptive(
    rho: DensityMatrix,
    cfg: AdaptiveConfig,
    round_members: list[ParamCircuit],
    on_success: Callable[[EnsembleObjective, OptResult, dict], SeparabilityVerdict],
    tag: int,
    trace: Optional[list] = None,
) -> SeparabilityVerdict:
    n = rho.n_qubits
    prev = prev_obj = None
    rounds = []
    best_cost = np.inf
    for S in range(1, cfg.rounds(n) + 1):
        obj = ensemble_objective(rho, round_members * S)
        res = minimize(
            obj,
            cfg.opt,
            init=_warm_init(prev, prev_obj, obj),
            seed_key=(tag, S),
            record_trace=trace is not None,
        )
        if trace is not None:
            trace.extend((f"S={S}", r, it, c) for r, it, c in res.trace)
        rounds.append({"S": S, "members": len(obj.members), "parameters": obj.arity, "cost": res.best_cost})
        log.info("round S=%d members=%d cost %.3e", S, len(obj.members), res.best_cost)
        best_cost = min(best_cost, res.best_cost)
        if res.best_cost < cfg.epsilon:
            diag = {"rounds": rounds, "S": S, "bounds": _bounds(n)}
            return on_success(obj, res, diag)
        prev, prev_obj = res.best_params, obj
    return SeparabilityVerdict(
        Status.INCONCLUSIVE, float(best_cost), diagnostics={"rounds": rounds, "bounds": _bounds(n)}
    )


def algorithm1(
    rho: DensityMatrix, cfg: AdaptiveConfig = AdaptiveConfig(), trace: Optional[list] = None
) -> SeparabilityVerdict:
    """Adaptive fully separable ensemble; each round has S(1 + 2n) parameters."""
    n = rho.n_qubits
    member = local_circuit(n, WMode.REDUCED2)

    def success(obj, res, diag):
        _, q = obj.split(res.best_params)
        diag["weights"] = [float(w) for w in q]
        return SeparabilityVerdict(
            Status.DETECTED,
            res.best_cost,
            n,
            _singletons(n),
            {"pool": "P1", "w_mode": WMode.REDUCED2.value, "members": len(obj.members)},
            _params_list(res.best_params),
            diag,
        )

    return _adaptive(rho, cfg, [member], success, 1, trace)


def algorithm2(
    rho: DensityMatrix, cfg: AdaptiveConfig = AdaptiveConfig(), trace: Optional[list] = None
) -> SeparabilityVerdict:
    """Adaptive ensemble over the entangling pool; k is the minimum member k."""
    n = rho.n_qubits
    if n < 2:
        raise ValueError("separability needs at least two qubits")
    pool = build_pool(n, cfg.w_mode)
    per_round = ([pool.p1] if cfg.include_p1_member_per_round else []) + list(pool.p2)

    def success(obj, res, diag):
        slots, q = obj.split(res.best_params)
        states = obj.member_states(res.best_params)
        members = []
        best_k, best_part, best_i = n + 1, None, -1
        for i, (circ, x, psi) in enumerate(zip(obj.members, slots, states)):
            if circ.pool_tag == "P1":
                k_m, part, purities = n, _singletons(n), []
            else:
                g = entanglement_graph(psi, circ, x, cfg.purity_tol)
                k_m, part = k_from_graph(g)
                purities = [{"pair": [j, kk], "purity": p} for j, kk, p in g.pair_purities]
            members.append(
                {"circuit": circ.descriptor, "weight": float(q[i]), "k": k_m, "partition": part,
                 "pair_purities": purities}
            )
            if k_m < best_k:
                best_k, best_part, best_i = k_m, part, i
        diag["members"] = members
        diag["k_member"] = best_i
        return SeparabilityVerdict(
            Status.DETECTED,
            res.best_cost,
            best_k,
            best_part,
            {"pool": "P2", "members": len(obj.members), "k_member_circuit": obj.members[best_i].descriptor},
            _params_list(res.best_params),
            diag,
        )

    return _adaptive(rho, cfg, per_round, success, 2, trace)
