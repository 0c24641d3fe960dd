"""State model tests: validation, embeddings, Kosaki norms, modular flow."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergocert.algebra import (
    Algebra,
    LOneElement,
    State,
    Weight,
    embed_l1,
    kosaki_norm,
    make_state,
    modular_flow,
    random_positive_l1,
    random_state,
    spatial_derivative,
)
from ergocert.errors import IllConditioned, InvalidExponent, NotFaithful, NotNormalized
from ergocert.linalg import HermitianOperator, is_psd, op_norm, schatten_norm
from helpers import random_hermitian, random_psd

HSETTINGS = settings(max_examples=20, deadline=None, derandomize=True)

M2 = Algebra((2,))
M23 = Algebra((2, 3))


def tracial_state(alg: Algebra) -> State:
    n = alg.total_dim
    return make_state(alg, (1.0 / n) * alg.identity())


# -- validation -----------------------------------------------------------


def test_make_state_tracial():
    s = tracial_state(M2)
    assert abs(s.rho.real_trace() - 1.0) <= 1e-14


def test_make_state_faithful_diagonal():
    s = make_state(M2, HermitianOperator.from_diagonal([2], [0.9, 0.1]))
    assert s.expectation(M2.identity()) == pytest.approx(1.0)


def test_make_state_rejects_singular():
    with pytest.raises(NotFaithful):
        make_state(M2, HermitianOperator.from_diagonal([2], [1.0, 0.0]))


def test_make_state_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        make_state(M2, HermitianOperator.from_diagonal([2], [0.9, 0.2]))


def test_make_state_rejects_ill_conditioned():
    p = 1e13 / (1e13 + 1.0)
    with pytest.raises(IllConditioned):
        make_state(M2, HermitianOperator.from_diagonal([2], [p, 1.0 - p]))


def test_weight_tracial_flag():
    w = Weight.tracial_weight(M23)
    assert w.tracial
    w2 = Weight(M2, HermitianOperator.from_diagonal([2], [2.0, 1.0]))
    assert not w2.tracial


# -- spatial derivative and embedding --------------------------------------


def test_spatial_derivative_is_rho():
    s = make_state(M2, HermitianOperator.from_diagonal([2], [0.7, 0.3]))
    d = spatial_derivative(s)
    assert d.rep.allclose(s.rho, atol=0.0)
    assert d.integral() == pytest.approx(1.0)


def test_spatial_derivative_equals_embedded_unit():
    s = random_state(3, M23)
    d = spatial_derivative(s)
    e = embed_l1(M23.identity(), s)
    assert op_norm(d.rep - e.rep) <= 1e-12


def test_embed_l1_trace_matches_state():
    s = random_state(5, M23)
    x = random_hermitian(np.random.default_rng(8), M23.signature)
    em = embed_l1(x, s)
    assert em.integral() == pytest.approx(s.expectation(x), abs=1e-10)


def test_embed_l1_positive_in_positive_out():
    s = random_state(7, M23)
    x = random_psd(np.random.default_rng(9), M23.signature)
    assert embed_l1(x, s).is_positive()


def test_embed_l1_scalar_density():
    s = tracial_state(M2)
    x = random_hermitian(np.random.default_rng(10), [2])
    em = embed_l1(x, s)
    assert op_norm(em.rep - 0.5 * x) <= 1e-12


# -- kosaki norms ----------------------------------------------------------


def test_kosaki_unit_any_p():
    s = random_state(11, M23)
    for p in (1.0, 2.0, 3.5, math.inf):
        assert kosaki_norm(M23.identity(), p, s) == pytest.approx(1.0, abs=1e-10)


def test_kosaki_p1_signed_diagonal():
    s = tracial_state(M2)
    x = HermitianOperator.from_diagonal([2], [1.0, -1.0])
    assert kosaki_norm(x, 1.0, s) == pytest.approx(1.0, abs=1e-12)


def test_kosaki_two_evaluation_orders():
    s = random_state(13, M23)
    x = random_hermitian(np.random.default_rng(14), M23.signature)
    lhs = kosaki_norm(x, 2.0, s) ** 2
    half = s.power(0.5)
    rhs = (half @ x.adjoint() @ half @ x).real_trace()
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_kosaki_p1_matches_embedding():
    s = random_state(15, M2)
    x = random_hermitian(np.random.default_rng(16), [2])
    assert kosaki_norm(x, 1.0, s) == pytest.approx(schatten_norm(embed_l1(x, s).rep, 1), abs=1e-12)


def test_kosaki_invalid_exponent():
    s = tracial_state(M2)
    with pytest.raises(InvalidExponent):
        kosaki_norm(M2.identity(), 0.9, s)


@HSETTINGS
@given(st.integers(0, 5000))
def test_kosaki_injective_and_dominated(seed):
    s = random_state(seed, M2)
    x = random_hermitian(np.random.default_rng(seed + 1), [2])
    n1 = kosaki_norm(x, 1.0, s)
    assert n1 <= op_norm(x) + 1e-9
    if n1 == 0.0:
        assert op_norm(x) <= 1e-9


# -- modular flow -----------------------------------------------------------


def test_modular_flow_fixes_commuting():
    s = make_state(M2, HermitianOperator.from_diagonal([2], [0.8, 0.2]))
    x = HermitianOperator.from_diagonal([2], [3.0, -1.0])
    for t in (0.0, 0.7, -2.3):
        assert op_norm(modular_flow(x, t, s) - x) <= 1e-12


def test_modular_flow_time_zero():
    s = random_state(17, M23)
    x = random_hermitian(np.random.default_rng(18), M23.signature)
    assert op_norm(modular_flow(x, 0.0, s) - x) <= 1e-12


def test_modular_flow_offdiagonal_phase():
    p = 0.8
    s = make_state(M2, HermitianOperator.from_diagonal([2], [p, 1.0 - p]))
    from ergocert.linalg import BlockMatrix

    e12 = BlockMatrix([np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)])
    t = 1.3
    got = modular_flow(e12, t, s)
    phase = (p / (1.0 - p)) ** (1j * t)
    assert abs(got.blocks[0][0, 1] - phase) <= 1e-12
    assert abs(got.blocks[0][1, 0]) <= 1e-14


@HSETTINGS
@given(st.integers(0, 5000), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_modular_flow_group_law_isometry_state_preserving(seed, t1, t2):
    s = random_state(seed, M2)
    x = random_hermitian(np.random.default_rng(seed + 2), [2])
    a = modular_flow(modular_flow(x, t1, s), t2, s)
    b = modular_flow(x, t1 + t2, s)
    assert op_norm(a - b) <= 1e-9 * max(1.0, op_norm(x))
    assert abs(op_norm(modular_flow(x, t1, s)) - op_norm(x)) <= 1e-9 * max(1.0, op_norm(x))
    assert s.expectation(modular_flow(x, t1, s)) == pytest.approx(s.expectation(x), abs=1e-10)


# -- generators -------------------------------------------------------------


def test_random_state_deterministic():
    a = random_state(42, M23)
    b = random_state(42, M23)
    assert a.rho.allclose(b.rho, atol=0.0)
    assert is_psd(a.rho)


def test_random_positive_l1_trace():
    a = random_positive_l1(21, M23, trace=3.7)
    assert a.integral() == pytest.approx(3.7, abs=1e-10)
    assert a.is_positive()
