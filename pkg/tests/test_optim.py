import numpy as np
import pytest

from pqcsep.circuits import WMode, apply, build_pool, local_circuit
from pqcsep.optim import (
    EnsembleObjective,
    NonFiniteCostError,
    Objective,
    OptimizerConfig,
    ensemble_objective,
    gradient,
    minimize,
    simplex_map,
    vqsr_noisy_objective,
    vqsr_objective,
)
from pqcsep.qcore import DensityMatrix, DimensionError, PureState, power_overlap, random_density
from pqcsep.statelib import BELL, bell_chain, rho3, rho_g

from oracles import dense_ensemble_cost


def _quadratic(target):
    target = np.asarray(target, dtype=float)
    return Objective(target.size, lambda p: float(np.sum((p - target) ** 2)), "quad")


class TestGradients:
    def test_one_qubit_closed_form(self):
        # Ry(b)Rz(a)|0> gives |<0|phi>| = |cos(b/2)|, so cost = 1 - cos(b/2) for b in [0, pi)
        c = local_circuit(1, WMode.REDUCED2)
        obj = vqsr_objective(PureState.basis("0"), c)
        for b in (0.3, 1.1, 2.5):
            x = np.array([b, 0.7])
            cost, g = obj.value_and_grad(x)
            assert cost == pytest.approx(1 - np.cos(b / 2), abs=1e-14)
            np.testing.assert_allclose(g, [0.5 * np.sin(b / 2), 0.0], atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_vqsr_analytic_vs_fd(self, n, rng):
        target = PureState.from_vector(rng.normal(size=2**n) + 1j * rng.normal(size=2**n))
        for c in build_pool(n).candidates:
            obj = vqsr_objective(target, c)
            x = rng.uniform(0, 2 * np.pi, obj.arity)
            _, g = obj.value_and_grad(x)
            np.testing.assert_allclose(g, gradient(obj, x), atol=1e-7)

    def test_noisy_analytic_vs_fd(self, rng):
        rho = rho_g(0.3, pairs=2)
        for c in build_pool(4).candidates[:2]:
            for m in (1, 3):
                obj = vqsr_noisy_objective(rho, m, c)
                x = rng.uniform(0, 2 * np.pi, obj.arity)
                _, g = obj.value_and_grad(x)
                np.testing.assert_allclose(g, gradient(obj, x), atol=1e-7)

    def test_ensemble_analytic_vs_fd(self, rng):
        pool = build_pool(3)
        obj = ensemble_objective(rho3(0.6), [pool.p1, pool.p2[0], pool.p2[0]])
        x = rng.uniform(0, 2 * np.pi, obj.arity)
        _, g = obj.value_and_grad(x)
        np.testing.assert_allclose(g, gradient(obj, x), atol=1e-7)


class TestObjectives:
    def test_vqsr_zero_at_exact_parameters(self, rng):
        c = build_pool(2).p2[0]
        x = rng.uniform(0, 2 * np.pi, c.num_params)
        target = apply(c, x)
        assert vqsr_objective(target, c)(x) < 1e-14

    def test_noisy_cost_matches_power_overlap(self, rng):
        rho = rho_g(0.5, pairs=2)
        c = build_pool(4).p2[0]
        x = rng.uniform(0, 2 * np.pi, c.num_params)
        num, den = power_overlap(rho, 2, apply(c, x))
        assert vqsr_noisy_objective(rho, 2, c)(x) == pytest.approx(1 - np.sqrt(num / den), abs=1e-13)

    def test_ensemble_matches_dense_oracle(self, rng):
        rho = random_density(3, rng=rng)
        pool = build_pool(3)
        members = [pool.p2[1], pool.p1, pool.p2[1]]
        obj = ensemble_objective(rho, members)
        x = rng.normal(size=obj.arity)
        slots, w = obj.split(x)
        states = [apply(c, s).amplitudes for c, s in zip(members, slots)]
        assert obj(x) == pytest.approx(dense_ensemble_cost(rho.matrix, states, w), abs=1e-13)

    def test_ensemble_arity(self):
        c = local_circuit(4, WMode.REDUCED2)
        for S in (1, 3, 11):
            assert ensemble_objective(DensityMatrix.maximally_mixed(4), [c] * S).arity == S * 9

    def test_rank_floor(self, rng):
        # with S members the cost cannot beat the spectral tail sum_{i>S} lambda_i^2
        rho = random_density(2, rng=rng)
        lam = np.sort(rho.eigvalsh())[::-1]
        c = build_pool(2).p2[0]
        for S in (1, 2, 3):
            obj = ensemble_objective(rho, [c] * S)
            floor = float(np.sum(lam[S:] ** 2))
            for _ in range(50):
                assert obj(rng.uniform(0, 2 * np.pi, obj.arity)) >= floor - 1e-12

    def test_dimension_errors(self):
        with pytest.raises(DimensionError):
            vqsr_objective(BELL, local_circuit(3))
        with pytest.raises(DimensionError):
            vqsr_objective(BELL, local_circuit(2))([0.0])
        with pytest.raises(ValueError):
            EnsembleObjective(rho3(0.5), [])

    def test_simplex_map(self):
        q = simplex_map([1000.0, 0.0, -5.0])
        assert np.all(np.isfinite(q)) and q.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(simplex_map([0, 0]), [0.5, 0.5])


class TestMinimize:
    def test_quadratic(self):
        res = minimize(_quadratic([1.0, 2.0]), OptimizerConfig(restarts=2, threshold=1e-8))
        assert res.best_cost < 1e-8
        assert res.converged_below_threshold

    def test_seeded_reproducible(self):
        obj = vqsr_objective(bell_chain(1), build_pool(2).p2[0])
        cfg = OptimizerConfig(restarts=3, seed=5)
        a, b = minimize(obj, cfg), minimize(obj, cfg)
        np.testing.assert_array_equal(a.best_params, b.best_params)
        assert a.best_cost == b.best_cost

    def test_seed_key_changes_starts(self):
        obj = _quadratic([0.0] * 3)
        cfg = OptimizerConfig(restarts=1, max_iterations=1, polish=False)
        a = minimize(obj, cfg, seed_key=(1,))
        b = minimize(obj, cfg, seed_key=(2,))
        assert not np.array_equal(a.best_params, b.best_params)

    def test_init_hook(self):
        obj = _quadratic([0.5])
        res = minimize(obj, OptimizerConfig(restarts=1, max_iterations=1, polish=False),
                       init=lambda r, rng: np.array([0.5]))
        assert res.best_cost == 0.0

    def test_stop_on_success(self):
        obj = _quadratic([1.0])
        res = minimize(obj, OptimizerConfig(restarts=5, threshold=1e-6))
        assert len(res.restart_costs) == 1
        res = minimize(obj, OptimizerConfig(restarts=5, threshold=1e-6, stop_on_success=False))
        assert len(res.restart_costs) == 5

    def test_trace_recorded(self):
        res = minimize(_quadratic([1.0]), OptimizerConfig(restarts=1), record_trace=True)
        assert res.trace and all(len(row) == 3 for row in res.trace)

    def test_all_nonfinite_raises(self):
        obj = Objective(1, lambda p: float("nan"), "nan")
        with pytest.raises(NonFiniteCostError):
            minimize(obj, OptimizerConfig(restarts=2))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(restarts=0)
        with pytest.raises(ValueError):
            OptimizerConfig(threshold=1.5)
