import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wvbayes.errors import BasisMismatch, InvalidState, ZeroNorm
from wvbayes.qcore import (
    Ket,
    Projector,
    apply_projector,
    basis_ket,
    inner,
    ket,
    normalize,
    phase_of,
)

L2 = ("0", "1")
R = 1 / math.sqrt(2)


def test_inner_orthonormal_basis():
    e0, e1 = basis_ket(L2, "0"), basis_ket(L2, "1")
    assert inner(e0, e0) == 1 + 0j
    assert inner(e0, e1) == 0j


def test_inner_hadamard_pair():
    assert abs(inner(ket(L2, [R, R]), ket(L2, [R, -R]))) < 1e-15


def test_inner_basis_mismatch_names_both():
    with pytest.raises(BasisMismatch) as info:
        inner(basis_ket(L2, "0"), basis_ket(("B", "C"), "B"))
    assert info.value.left == L2 and info.value.right == ("B", "C")


def test_apply_projector_examples():
    e0, e1 = basis_ket(L2, "0"), basis_ket(L2, "1")
    p0 = Projector(e0)
    assert apply_projector(p0, e0).allclose(e0)
    assert apply_projector(p0, e1).allclose(ket(L2, [0, 0]))
    half = apply_projector(Projector(ket(L2, [R, R])), e0)
    assert half.allclose(ket(L2, [0.5, 0.5]))


def test_apply_projector_basis_mismatch():
    with pytest.raises(BasisMismatch):
        apply_projector(Projector(basis_ket(L2, "0")), basis_ket(("a", "b"), "a"))


def test_normalize_examples():
    assert normalize(ket(L2, [2, 0])).allclose(ket(L2, [1, 0]))
    assert normalize(ket(L2, [1, 1])).allclose(ket(L2, [R, R]))
    with pytest.raises(ZeroNorm):
        normalize(ket(L2, [0, 0]))


def test_ket_invariants():
    with pytest.raises(InvalidState):
        Ket(("a", "a"), np.array([1, 0]))
    with pytest.raises(InvalidState):
        Ket(("a",), np.array([1, 0]))
    with pytest.raises(InvalidState):
        Ket(("a", "b"), np.array([np.nan, 0]))
    with pytest.raises(InvalidState):
        Ket(("a", "b"), np.array([1, 1]), normalized=True)
    with pytest.raises(InvalidState):
        Projector(ket(L2, [1, 1]))


def test_ket_is_immutable():
    k = ket(L2, [1, 0])
    with pytest.raises(ValueError):
        k.components[0] = 5


def test_phase_of_range():
    assert phase_of(-1 + 0j) == math.pi
    assert phase_of(complex(-1, -0.0)) == math.pi


complex_st = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def kets(dim):
    return st.lists(complex_st, min_size=dim, max_size=dim).map(lambda c: ket([str(i) for i in range(dim)], c))


@st.composite
def ket_pairs(draw):
    d = draw(st.integers(2, 8))
    return draw(kets(d)), draw(kets(d))


@settings(max_examples=200, deadline=None)
@given(ket_pairs())
def test_conjugate_symmetry(pair):
    a, b = pair
    assert abs(inner(a, b) - inner(b, a).conjugate()) <= 1e-12 * max(1.0, a.norm() * b.norm())


@settings(max_examples=200, deadline=None)
@given(ket_pairs())
def test_cauchy_schwarz(pair):
    a, b = pair
    lhs = abs(inner(a, b)) ** 2
    rhs = inner(a, a).real * inner(b, b).real
    assert lhs <= rhs + 1e-12 * max(1.0, rhs)


@settings(max_examples=200, deadline=None)
@given(ket_pairs())
def test_projector_idempotent(pair):
    axis, k = pair
    if axis.norm() < 1e-6:
        return
    p = Projector(normalize(axis))
    once = apply_projector(p, k)
    twice = apply_projector(p, once)
    assert twice.allclose(once, atol=1e-12 * max(1.0, k.norm()))


@settings(max_examples=100, deadline=None)
@given(kets(4))
def test_normalize_keeps_direction(k):
    if k.norm() < 1e-6:
        return
    n = normalize(k)
    assert abs(n.norm() - 1) <= 1e-12
    mask = np.abs(n.components) > 1e-6
    ratio = k.components[mask] / n.components[mask]
    assert np.allclose(ratio, k.norm(), rtol=1e-9)
