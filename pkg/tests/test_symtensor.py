import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minktensor.symtensor import (
    SymTensor,
    index_tuples,
    kappa,
    kappa_omega,
    metric_power,
    metric_tensor,
    multiindex_coefficient,
    rank2_spectrum,
    sphere_moment,
    stack_mean,
    sym_product,
    tensor_power,
    trace2,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def random_tensor(draw, dim, rank):
    n = len(index_tuples(dim, rank))
    return SymTensor(dim, rank, np.array(draw(st.lists(finite, min_size=n, max_size=n))))


@st.composite
def tensors(draw, dim=None, rank=None):
    dim = dim if dim is not None else draw(st.integers(1, 3))
    rank = rank if rank is not None else draw(st.integers(0, 3))
    return random_tensor(draw, dim, rank)


# -- kappa / omega ------------------------------------------------------


@pytest.mark.parametrize("n,k,w", [
    (0, 1.0, 0.0),
    (1, 2.0, 2.0),
    (2, math.pi, 2 * math.pi),
    (3, 4 * math.pi / 3, 4 * math.pi),
])
def test_kappa_omega_small(n, k, w):
    assert kappa_omega(n) == pytest.approx((k, w), rel=1e-14)


def test_kappa5_by_gamma_and_recursion():
    assert kappa(5) == pytest.approx(8 * math.pi**2 / 15, rel=1e-14)
    for n in range(2, 12):
        assert kappa(n) == pytest.approx(kappa(n - 2) * 2 * math.pi / n, rel=1e-13)


# -- products -----------------------------------------------------------


def test_tensor_power_examples():
    assert tensor_power([1, 0], 2).entries == {(1, 1): 1.0, (1, 2): 0.0, (2, 2): 0.0}
    assert tensor_power([1, 1], 2).entries == {(1, 1): 1.0, (1, 2): 1.0, (2, 2): 1.0}
    assert tensor_power([3, 4], 1).entries == {(1,): 3.0, (2,): 4.0}


def test_symmetric_product_of_basis_vectors():
    e1, e2 = tensor_power([1, 0], 1), tensor_power([0, 1], 1)
    P = sym_product(e1, e2)
    assert P[(1, 2)] == pytest.approx(0.5)
    assert P[(1, 1)] == 0 and P[(2, 2)] == 0


def test_metric_square_entries():
    Q2 = metric_power(2, 2)
    assert Q2[(1, 1, 1, 1)] == pytest.approx(1.0)
    assert Q2[(1, 1, 2, 2)] == pytest.approx(1 / 3)
    assert metric_power(2, 1).entries == {(1, 1): 1.0, (1, 2): 0.0, (2, 2): 1.0}
    assert trace2(metric_power(3, 1)) == 3


def brute_symmetrize(A, B):
    """Full-array symmetrisation of the outer product, independent of sym_product."""
    outer = np.multiply.outer(A.to_array(), B.to_array())
    m = A.rank + B.rank
    perms = list(itertools.permutations(range(m)))
    return sum(np.transpose(outer, p) for p in perms) / len(perms)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_sym_product_matches_brute_force(data):
    d = data.draw(st.integers(1, 3))
    A = data.draw(tensors(d, data.draw(st.integers(1, 2))))
    B = data.draw(tensors(d, data.draw(st.integers(1, 2))))
    np.testing.assert_allclose(sym_product(A, B).to_array(), brute_symmetrize(A, B), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_sym_product_commutative_and_associative(data):
    d = data.draw(st.integers(1, 3))
    A, B, C = (data.draw(tensors(d, data.draw(st.integers(0, 2)))) for _ in range(3))
    assert sym_product(A, B).allclose(sym_product(B, A), rtol=1e-10, atol=1e-9)
    left = sym_product(sym_product(A, B), C)
    right = sym_product(A, sym_product(B, C))
    assert left.allclose(right, rtol=1e-10, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=2, max_size=3), st.integers(0, 4))
def test_tensor_power_evaluates_to_inner_product_power(v, p):
    x = np.linspace(0.3, -0.7, len(v))
    T = tensor_power(v, p)
    assert T.evaluate(*([x] * p)) == pytest.approx(float(np.dot(v, x)) ** p, rel=1e-9, abs=1e-9)


# -- coefficients, sphere moments ----------------------------------------


def test_multiindex_coefficients():
    T = SymTensor.from_entries(2, 2, {(1, 2): 0.7})
    assert multiindex_coefficient(T, (1, 2)) == pytest.approx(1.4)
    U = SymTensor.from_entries(2, 4, {(1, 1, 2, 2): 0.25})
    assert multiindex_coefficient(U, (2, 1, 2, 1)) == pytest.approx(1.5)
    back = SymTensor.from_coefficients(2, 4, {(1, 1, 2, 2): 1.5})
    assert back[(1, 1, 2, 2)] == pytest.approx(0.25)


def test_sphere_moments():
    assert sphere_moment(2, 0).values[0] == pytest.approx(2 * math.pi)
    assert sphere_moment(2, 2).allclose(metric_tensor(2) * math.pi)
    assert sphere_moment(3, 1).max_abs() == 0
    assert sphere_moment(3, 0).values[0] == pytest.approx(4 * math.pi)


def test_sphere_moment_monte_carlo():
    rng = np.random.default_rng(3)
    g = rng.standard_normal((200_000, 3))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    emp = 4 * math.pi * np.mean(u[:, 0] ** 4)
    assert sphere_moment(3, 4)[(1, 1, 1, 1)] == pytest.approx(emp, rel=0.02)


# -- spectra, traces, averages ---------------------------------------------


def test_spectrum_examples():
    sp = rank2_spectrum(metric_tensor(3))
    np.testing.assert_allclose(sp.eigenvalues, 1.0)
    assert sp.anisotropy_ratio == pytest.approx(1.0)
    sp = rank2_spectrum(SymTensor.from_entries(2, 2, {(1, 1): 0.3979, (2, 2): 0.2387}))
    assert sp.anisotropy_ratio == pytest.approx(0.5999, abs=1e-4)
    assert rank2_spectrum(SymTensor.zeros(2, 2)).anisotropy_ratio == 0.0


@settings(max_examples=50, deadline=None)
@given(tensors(rank=2))
def test_spectrum_reconstructs_matrix(T):
    sp = rank2_spectrum(T)
    V = sp.eigenvectors
    np.testing.assert_allclose(V @ np.diag(sp.eigenvalues) @ V.T, T.matrix(), atol=1e-9)
    assert 0.0 <= sp.anisotropy_ratio <= 1.0
    assert sum(sp.eigenvalues) == pytest.approx(trace2(T), abs=1e-9)


def test_trace_examples():
    assert trace2(metric_tensor(4)) == 4
    assert trace2(SymTensor.from_entries(2, 2, {(1, 1): 0.375, (2, 2): 0.375})) == 0.75


def test_stack_mean_standard_error():
    ts = [SymTensor.scalar(v, 2) for v in (1.0, 2.0, 3.0, 4.0)]
    mean, se = stack_mean(ts)
    assert mean.values[0] == 2.5
    assert se.values[0] == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


# -- storage and serialisation ------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(tensors())
def test_json_round_trip(T):
    back = SymTensor.from_json(T.to_json())
    assert (back.dim, back.rank) == (T.dim, T.rank)
    np.testing.assert_array_equal(back.values, T.values)


@settings(max_examples=30, deadline=None)
@given(tensors(rank=3))
def test_array_round_trip_and_index_order(T):
    assert SymTensor.from_array(T.to_array()).allclose(T, atol=0)
    assert T[(3 if T.dim >= 3 else 1, 1, 1)] == T[(1, 1, 3 if T.dim >= 3 else 1)]


def test_invalid_constructions():
    with pytest.raises(ValueError):
        SymTensor(2, 2, [1.0, 2.0])
    with pytest.raises(ValueError):
        SymTensor(2, 1, [np.nan, 1.0])
    with pytest.raises(KeyError):
        SymTensor.from_entries(2, 2, {(1, 3): 1.0})
    with pytest.raises(ValueError):
        sym_product(SymTensor.zeros(2, 1), SymTensor.zeros(3, 1))
