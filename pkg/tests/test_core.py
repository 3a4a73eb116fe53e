import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hamsym.core import (KahlerVector, QuantumState, StructureError, apply_complex_structure,
                         classify_lift, commutator_defect, complex_structure,
                         inner_product_decompose, lift_operator, strocchi_inverse, strocchi_map,
                         symplectic_matrix, unlift_operator)

finite = st.floats(-10, 10, allow_nan=False)


def complex_vectors(n):
    return arrays(np.float64, (2, n), elements=finite).map(lambda a: a[0] + 1j * a[1])


@given(st.integers(1, 6).flatmap(complex_vectors))
def test_strocchi_roundtrip(psi):
    z = strocchi_map(psi)
    assert np.array_equal(strocchi_inverse(z).amplitudes, psi)


@settings(max_examples=50)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(complex_vectors(n), complex_vectors(n))))
def test_inner_product_splits_into_metric_and_form(pair):
    phi, psi = pair
    g, w = inner_product_decompose(phi, psi)
    ip = np.vdot(phi, psi)
    assert g == pytest.approx(ip.real, abs=1e-9)
    assert w == pytest.approx(ip.imag, abs=1e-9)


def test_complex_structure_squares_to_minus_one():
    for n in (1, 3):
        j = complex_structure(n)
        assert np.array_equal(j @ j, -np.eye(2 * n))
        assert np.array_equal(symplectic_matrix(n), -j)


def test_apply_complex_structure_is_multiplication_by_i():
    psi = np.array([1 + 2j, -0.5j])
    z = apply_complex_structure(strocchi_map(psi))
    assert np.allclose(strocchi_inverse(z).amplitudes, 1j * psi)


def test_lift_is_an_algebra_homomorphism():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.allclose(lift_operator(a @ b), lift_operator(a) @ lift_operator(b))
    assert np.allclose(lift_operator(a.conj().T), lift_operator(a).T)
    assert commutator_defect(lift_operator(a)) < 1e-14
    assert np.allclose(unlift_operator(lift_operator(a)), a)


def test_unlift_rejects_non_commuting():
    with pytest.raises(StructureError):
        unlift_operator(np.diag([1.0, 2.0]))
    with pytest.raises(StructureError):
        unlift_operator(np.eye(3))


def test_classify_lift():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = a + a.conj().T
    u = np.linalg.qr(a)[0]
    assert classify_lift(lift_operator(h)) == (True, True, False)
    assert classify_lift(lift_operator(u)) == (True, False, True)
    assert classify_lift(np.diag([1.0, 2.0])) == (False, False, False)


def test_state_and_vector_validation():
    assert QuantumState([0.6, 0.8j]).normalized
    assert not QuantumState([1.0, 1.0]).normalized
    with pytest.raises(ValueError):
        QuantumState([])
    with pytest.raises(ValueError):
        KahlerVector([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        KahlerVector.from_array([1.0, 2.0, 3.0])
