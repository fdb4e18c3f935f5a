"""Cost functions over circuit parameters and a seeded multi-restart optimizer."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize as sopt

from .circuits import ParamCircuit, simulate
from .qcore import DensityMatrix, DimensionError, Ensemble, PureState, hermitian_power

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


class NonFiniteCostError(FloatingPointError):
    pass


@dataclass
class Objective:
    """A scalar cost over a flat parameter vector.

    ``value_and_grad`` is the analytic route used by the optimizer; the
    ``gradient`` function below is the independent finite-difference route.
    """

    arity: int
    evaluate: Callable[[np.ndarray], float]
    description: str
    value_and_grad: Optional[Callable[[np.ndarray], tuple[float, np.ndarray]]] = None

    def __call__(self, params) -> float:
        return self.evaluate(np.asarray(params, dtype=float))


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 2000
    restarts: int = 10
    learning_rate: float = 0.05
    tolerance: float = 1e-9
    seed: int = 0
    threshold: float = 1e-4
    # Adam stops once the best cost improved by less than `tolerance` over this many steps
    patience: int = 100
    polish: bool = True
    polish_iterations: int = 500
    stop_on_success: bool = True

    def __post_init__(self):
        if min(self.max_iterations, self.restarts, self.patience) < 1:
            raise ValueError("iteration counts must be positive")
        if self.learning_rate <= 0 or self.tolerance <= 0:
            raise ValueError("learning rate and tolerance must be positive")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass
class OptResult:
    best_params: np.ndarray
    best_cost: float
    iterations_used: int
    restart_index: int
    converged_below_threshold: bool
    restart_costs: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def _check(cost: float) -> float:
    if not np.isfinite(cost):
        raise NonFiniteCostError(f"non-finite cost {cost}")
    return cost


def gradient(obj: Objective, params, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient."""
    x = np.array(params, dtype=float)
    if x.size != obj.arity:
        raise DimensionError(f"expected {obj.arity} parameters, got {x.size}")
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (_check(obj(xp)) - _check(obj(xm))) / (2 * h)
    return g


def simplex_map(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise ValueError("simplex_map needs at least one entry")
    e = np.exp(raw - raw.max())
    return e / e.sum()


def _value_and_grad(obj: Objective, x: np.ndarray) -> tuple[float, np.ndarray]:
    if obj.value_and_grad is not None:
        c, g = obj.value_and_grad(x)
    else:
        c, g = obj(x), gradient(obj, x)
    return _check(float(c)), g


# ------------------------------------------------------------------ objectives


def vqsr_objective(target: PureState, c: ParamCircuit) -> Objective:
    """``1 - |<psi| U(p) |0..0>|``."""
    if target.n_qubits != c.n_qubits:
        raise DimensionError("target and circuit act on different numbers of qubits")
    psi = target.amplitudes

    def vg(p):
        p = np.asarray(p, dtype=float)[None, :]
        phi = simulate(c, p)
        ov = np.vdot(psi, phi[0])
        a = abs(ov)
        cost = max(0.0, 1.0 - a)
        if a < 1e-300:
            return cost, np.zeros(p.shape[1])
        lam = (-ov / (2 * a)) * psi
        return cost, c.program.adjoint(p, phi, lam[None, :])[0]

    return Objective(c.num_params, lambda p: vg(p)[0], f"vqsr[{c.pool_tag}{c.pool_index}]", vg)


def vqsr_noisy_objective(rho_noise: DensityMatrix, m: int, c: ParamCircuit) -> Objective:
    """``1 - sqrt(<phi|rho^m|phi> / tr rho^m)`` with ``phi = U(p)|0..0>``."""
    if int(m) < 1:
        raise ValueError("m must be a positive integer")
    if rho_noise.n_qubits != c.n_qubits:
        raise DimensionError("state and circuit act on different numbers of qubits")
    power = hermitian_power(rho_noise.matrix, m)
    den = float(np.trace(power).real)

    def vg(p):
        p = np.asarray(p, dtype=float)[None, :]
        phi = simulate(c, p)
        v = power @ phi[0]
        r = max(float(np.vdot(phi[0], v).real) / den, 0.0)
        cost = max(0.0, 1.0 - np.sqrt(r))
        if r < 1e-300:
            return cost, np.zeros(p.shape[1])
        lam = (-1.0 / (2 * np.sqrt(r) * den)) * v
        return cost, c.program.adjoint(p, phi, lam[None, :])[0]

    return Objective(
        c.num_params, lambda p: vg(p)[0], f"vqsr-noisy[m={m},{c.pool_tag}{c.pool_index}]", vg
    )


class EnsembleObjective(Objective):
    """Squared Hilbert-Schmidt distance between a weighted circuit ensemble and a target.

    Parameters are the concatenated member slots followed by one raw (softmax)
    weight per member. The cost is assembled from the member Gram matrix, so
    one evaluation touches O(M^2) overlaps for M members.
    """

    def __init__(self, rho_target: DensityMatrix, members: Sequence[ParamCircuit]):
        members = list(members)
        if not members:
            raise ValueError("an ensemble objective needs at least one member")
        if any(c.n_qubits != rho_target.n_qubits for c in members):
            raise DimensionError("all members must act on the target's qubits")
        self.members = members
        self.rho = rho_target.matrix
        self.tr_rho2 = float(np.vdot(self.rho, self.rho).real)
        self.offsets = np.cumsum([0] + [c.num_params for c in members])
        self.n_slots = int(self.offsets[-1])
        groups: dict[int, list[int]] = {}
        for i, c in enumerate(members):
            groups.setdefault(id(c), []).append(i)
        self.groups = [(members[idx[0]], idx) for idx in groups.values()]
        super().__init__(
            self.n_slots + len(members),
            lambda p: self._vg(p, want_grad=False)[0],
            f"ensemble[M={len(members)}]",
            self._vg,
        )

    def split(self, params) -> tuple[list[np.ndarray], np.ndarray]:
        params = np.asarray(params, dtype=float)
        slots = [params[self.offsets[i] : self.offsets[i + 1]] for i in range(len(self.members))]
        return slots, simplex_map(params[self.n_slots :])

    def _states(self, params) -> np.ndarray:
        slots, _ = self.split(params)
        d = self.rho.shape[0]
        phi = np.empty((len(self.members), d), dtype=complex)
        for circ, idx in self.groups:
            batch = np.stack([slots[i] for i in idx])
            phi[idx] = simulate(circ, batch)
        return phi

    def member_states(self, params) -> list[PureState]:
        return [PureState.from_vector(v, normalize=False) for v in self._states(params)]

    def ensemble(self, params) -> Ensemble:
        _, q = self.split(params)
        return Ensemble(q, self.member_states(params))

    def _vg(self, params, want_grad: bool = True):
        params = np.asarray(params, dtype=float)
        if params.size != self.arity:
            raise DimensionError(f"expected {self.arity} parameters, got {params.size}")
        slots, q = self.split(params)
        phi = self._states(params)  # (M, d)
        gram = phi.conj() @ phi.T  # gram[a, b] = <phi_a|phi_b>
        g2 = np.abs(gram) ** 2
        rphi = phi @ self.rho.T  # rows are rho|phi_m>
        diag = np.einsum("md,md->m", phi.conj(), rphi).real
        cost = float(q @ g2 @ q - 2 * q @ diag + self.tr_rho2)
        cost = max(cost, 0.0)
        if not want_grad:
            return cost, None
        # dC/d(conj phi_m) = 2 q_m (sigma - rho) |phi_m>
        sigma_phi = (q[:, None] * gram).T @ phi
        lam = 2 * q[:, None] * (sigma_phi - rphi)
        grad = np.zeros(self.arity)
        for circ, idx in self.groups:
            batch = np.stack([slots[i] for i in idx])
            gb = circ.program.adjoint(batch, phi[idx], lam[idx])
            for row, i in enumerate(idx):
                grad[self.offsets[i] : self.offsets[i + 1]] = gb[row]
        gq = 2 * (g2 @ q - diag)
        grad[self.n_slots :] = q * (gq - q @ gq)
        return cost, grad


def ensemble_objective(rho_target: DensityMatrix, members: Sequence[ParamCircuit]) -> EnsembleObjective:
    return EnsembleObjective(rho_target, members)


# ------------------------------------------------------------------ optimizer

InitFn = Callable[[int, np.random.Generator], Optional[np.ndarray]]


def _adam(obj, x0, cfg: OptimizerConfig, restart: int, trace: Optional[list]):
    b1, b2, eps = 0.9, 0.999, 1e-8
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best_c, best_x = np.inf, x.copy()
    ref, ref_t = np.inf, 0
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        c, g = _value_and_grad(obj, x)
        if trace is not None:
            trace.append((restart, it, c))
        if c < best_c:
            best_c, best_x = c, x.copy()
        if c < cfg.threshold:
            break
        if best_c < ref - cfg.tolerance:
            ref, ref_t = best_c, it
        elif it - ref_t >= cfg.patience:
            break
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**it)
        vhat = v / (1 - b2**it)
        x = x - cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
    return best_x, best_c, it


def _polish(obj, x0, c0, cfg: OptimizerConfig):
    def fun(x):
        return _value_and_grad(obj, x)

    try:
        res = sopt.minimize(
            fun,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": cfg.polish_iterations, "ftol": 1e-16, "gtol": 1e-12},
        )
    except NonFiniteCostError:
        return x0, c0, 0
    if np.isfinite(res.fun) and res.fun < c0:
        return np.asarray(res.x, dtype=float), float(res.fun), int(res.nit)
    return x0, c0, int(res.nit)


def minimize(
    obj: Objective,
    cfg: OptimizerConfig = OptimizerConfig(),
    init: Optional[InitFn] = None,
    seed_key: Sequence[int] = (),
    record_trace: bool = False,
) -> OptResult:
    """Seeded multi-restart Adam descent with an optional L-BFGS polish.

    Restart r draws its start uniformly from [0, 2pi) using its own child seed,
    unless ``init(r, rng)`` returns a vector. The lowest cost wins; ties go to
    the lower restart index.
    """
    root = np.random.SeedSequence([int(cfg.seed) & 0xFFFFFFFF, *map(int, seed_key)])
    children = root.spawn(cfg.restarts)
    trace: Optional[list] = [] if record_trace else None
    best: Optional[OptResult] = None
    costs = []
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        x0 = init(r, rng) if init is not None else None
        if x0 is None:
            x0 = rng.uniform(0.0, TWO_PI, obj.arity)
        try:
            x, c, its = _adam(obj, x0, cfg, r, trace)
            if cfg.polish:
                x, c, pits = _polish(obj, x, c, cfg)
                its += pits
        except NonFiniteCostError as exc:
            log.warning("restart %d aborted: %s", r, exc)
            costs.append(float("nan"))
            continue
        costs.append(c)
        if best is None or c < best.best_cost:
            best = OptResult(x, c, its, r, c < cfg.threshold)
        if cfg.stop_on_success and c < cfg.threshold:
            break
    if best is None:
        raise NonFiniteCostError("every restart hit a non-finite cost")
    best.restart_costs = costs
    best.trace = trace or []
    return best
