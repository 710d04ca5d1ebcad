import numpy as np
import pytest
from hypothesis import given, strategies as st

from gsmdetect.numerics import (OP_COST, FlopCounter, GramFactor, SingularGram,
                                flops_charge, hermitian, matvec, norm_sq, project,
                                solve_gram)

from conftest import crandn


def test_hermitian_scalar():
    np.testing.assert_array_equal(hermitian(np.array([[2 + 3j]])), [[2 - 3j]])


def test_hermitian_identity_and_involution(rng):
    np.testing.assert_array_equal(hermitian(np.eye(3)), np.eye(3))
    a = crandn(rng, 3, 2)
    np.testing.assert_array_equal(hermitian(hermitian(a)), a)


def test_solve_gram_identity():
    out = solve_gram(np.eye(2), np.array([1 + 1j, 2]))
    np.testing.assert_allclose(out, [1 + 1j, 2])


def test_solve_gram_single_column():
    # (h^H h)^-1 h^H rhs = 4*2/4
    out = solve_gram(np.array([[2.0], [0.0]]), np.array([4.0, 5.0]))
    np.testing.assert_allclose(out, [2.0])


def test_solve_gram_recovers_exact_solution(rng):
    h = crandn(rng, 4, 2)
    x = crandn(rng, 2)
    np.testing.assert_allclose(solve_gram(h, h @ x), x, atol=1e-10)


def test_solve_gram_singular():
    h = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]])
    with pytest.raises(SingularGram):
        solve_gram(h, np.ones(3))


def test_solve_gram_wide_is_singular():
    with pytest.raises(SingularGram):
        GramFactor(np.ones((1, 2)))


def test_ill_conditioned_uses_pivoted_qr():
    eps = 1e-7
    h = np.array([[1.0, 1.0], [0.0, eps], [0.0, 0.0]])
    f = GramFactor(h)
    assert f.method == "qr"
    x = np.array([1.0, -2.0])
    np.testing.assert_allclose(f.solve(h @ x), x, rtol=1e-6)


def test_project_axis():
    out = project(np.array([[1.0], [0.0]]), np.array([2.0, 0.5]))
    np.testing.assert_allclose(out, [2.0, 0.0])


def test_project_fixes_range(rng):
    h = crandn(rng, 5, 2)
    y = h @ crandn(rng, 2)
    np.testing.assert_allclose(project(h, y), y, atol=1e-10)


@st.composite
def full_rank(draw):
    rows = draw(st.integers(2, 7))
    cols = draw(st.integers(1, rows))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return crandn(rng, rows, cols), rng


@given(full_rank())
def test_projection_properties(case):
    h, rng = case
    u, v = crandn(rng, h.shape[0]), crandn(rng, h.shape[0])
    pu = project(h, u)
    assert np.linalg.norm(project(h, pu) - pu) <= 1e-9 * np.linalg.norm(u)
    assert abs(np.vdot(pu, v) - np.vdot(u, project(h, v))) <= 1e-9 * (
        np.linalg.norm(u) * np.linalg.norm(v))
    assert np.linalg.norm(pu) <= np.linalg.norm(u) * (1 + 1e-12)


@given(full_rank())
def test_solve_gram_recovery_well_conditioned(case):
    h, rng = case
    if np.linalg.cond(h) >= 1e3:
        return
    x = crandn(rng, h.shape[1])
    got = solve_gram(h, h @ x)
    assert np.linalg.norm(got - x) <= 1e-8 * np.linalg.norm(x)


def test_flop_charges():
    c = FlopCounter()
    flops_charge(c, "cmul", 1)
    assert c.total == 6
    flops_charge(c, "cadd", 3)
    assert c.total == 12
    flops_charge(c, "radd", 0)
    assert c.total == 12
    c.reset()
    assert c.total == 0


def test_flop_costs_table():
    assert OP_COST["cmul"] == 6 and OP_COST["cadd"] == 2 and OP_COST["rmul"] == 1


def test_flop_accounting_deterministic(rng):
    h = crandn(rng, 4, 2)
    y = crandn(rng, 4)
    totals = []
    for _ in range(2):
        c = FlopCounter()
        project(h, y, counter=c)
        totals.append(c.total)
    assert totals[0] == totals[1] > 0


def test_matvec_matches_numpy(rng):
    h = crandn(rng, 4, 3)
    x = crandn(rng, 6, 3)
    np.testing.assert_allclose(matvec(h, x), x @ h.T, rtol=1e-13)
    np.testing.assert_allclose(norm_sq(x), (abs(x) ** 2).sum(axis=-1), rtol=1e-13)
