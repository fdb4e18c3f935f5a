import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pqcsep.circuits import canonical_unitary, q_from_canonical, q_gate
from pqcsep.optim import simplex_map
from pqcsep.qcore import PureState, hs_distance_sq, purity, random_density, reduced_density
from pqcsep.stateio import state_from_json, state_to_json

from oracles import equal_up_to_phase

angle = st.floats(-10, 10, allow_nan=False)
finite = st.floats(-5, 5, allow_nan=False)


@st.composite
def pure_states(draw, n=3):
    re = draw(arrays(float, 2**n, elements=finite))
    im = draw(arrays(float, 2**n, elements=finite))
    v = re + 1j * im
    if np.linalg.norm(v) < 1e-3:
        v[0] += 1
    return PureState.from_vector(v)


@settings(max_examples=60, deadline=None)
@given(angle, angle, angle)
def test_q_is_unitary(a, b, c):
    u = q_gate(a, b, c)
    assert np.max(np.abs(u @ u.conj().T - np.eye(4))) < 1e-12


@settings(max_examples=60, deadline=None)
@given(angle, angle, angle)
def test_canonical_wrapping(a, b, c):
    assert equal_up_to_phase(q_from_canonical(a, b, c).matrix(), canonical_unitary(a, b, c)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(pure_states(), st.sets(st.integers(1, 3), min_size=1))
def test_marginals_are_states(psi, keep):
    red = reduced_density(psi, keep)
    assert abs(np.trace(red.matrix).real - 1) < 1e-12
    assert red.eigvalsh()[0] > -1e-12
    assert 1 / red.dim - 1e-12 <= purity(red) <= 1 + 1e-12


@settings(max_examples=60, deadline=None)
@given(pure_states())
def test_json_round_trip_bit_exact(psi):
    back = state_from_json(state_to_json(psi))
    np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(1, 8), elements=st.floats(-700, 700)))
def test_simplex_map_lands_on_simplex(raw):
    q = simplex_map(raw)
    assert np.all(q >= 0) and abs(q.sum() - 1) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hs_symmetric_nonnegative(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(2, rng=rng), random_density(2, rng=rng)
    assert hs_distance_sq(a, b) == hs_distance_sq(b, a) >= 0
