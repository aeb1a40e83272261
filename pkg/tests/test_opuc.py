import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvlax import coeffs, hamiltonians as ham, opuc
from cmvlax.coeffs import VerblunskySequence as V
from cmvlax.errors import DegreeMismatch, RhoDegenerate
from cmvlax.opuc import PolyCoeffs


def test_first_step():
    a = 0.3 - 0.2j
    phi, star = opuc.szego_step(opuc.one(), opuc.one(), a)
    np.testing.assert_array_equal(phi.coeffs, [-np.conj(a), 1])
    np.testing.assert_array_equal(star.coeffs, [1, -a])


def test_zero_coefficients_give_monomials():
    phi, star = opuc.monic_polys(np.zeros(5), 5)
    np.testing.assert_array_equal(phi.coeffs, [0, 0, 0, 0, 0, 1])
    np.testing.assert_array_equal(star.coeffs, [1, 0, 0, 0, 0, 0])


def test_reversal_of_linear():
    a = 0.4 + 0.1j
    rev = opuc.reversed_poly(PolyCoeffs(np.array([-np.conj(a), 1])))
    np.testing.assert_array_equal(rev.coeffs, [1, -a])


def test_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        opuc.szego_step(PolyCoeffs(np.array([0, 1.0])), opuc.one(), 0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_reversal_identity_maintained(n, seed):
    r = np.random.default_rng(seed)
    phi, star = opuc.monic_polys(coeffs.random_alphas(r, n), n)
    assert phi.coeffs[-1] == 1
    np.testing.assert_allclose(star.coeffs, opuc.reversed_poly(phi).coeffs, atol=1e-14)
    z = complex(*r.normal(size=2))
    assert abs(star(z) - z**n * np.conj(phi(1 / np.conj(z)))) < 1e-9 * max(1, abs(z) ** n)


def test_transfer_examples():
    z = 0.7 + 0.2j
    np.testing.assert_array_equal(opuc.transfer(0, z), [[z, 0], [0, 1]])
    a = 0.5 - 0.3j
    r = np.sqrt(1 - abs(a) ** 2)
    np.testing.assert_allclose(opuc.transfer_polys([a], 1, z), [(z - np.conj(a)) / r, (1 - a * z) / r])
    with pytest.raises(RhoDegenerate):
        opuc.transfer(1.0, z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10), st.integers(0, 2**31 - 1))
def test_transfer_determinant(n, seed):
    r = np.random.default_rng(seed)
    al = coeffs.random_alphas(r, n)
    z = np.exp(1j * r.uniform(0, 2 * np.pi)) * r.uniform(0.2, 1.5)
    t = opuc.transfer_product(al, n, z)
    # ad - bc cancels: the rounding error scales with the squared norm of T_n
    assert abs(np.linalg.det(t) - z**n) < 1e-13 * max(1.0, np.linalg.norm(t, 2) ** 2)


def test_single_transfer_determinant(rng):
    for a in coeffs.random_alphas(rng, 50):
        z = complex(*rng.normal(size=2))
        assert abs(np.linalg.det(opuc.transfer(a, z)) - z) < 1e-12 * max(1, abs(z))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_recursion_matches_transfer(n, seed):
    r = np.random.default_rng(seed)
    al = coeffs.random_alphas(r, n)
    z = complex(*r.normal(size=2))
    phi, star = opuc.orthonormal_polys(al, n)
    tv = opuc.transfer_polys(al, n, z)
    scale = max(1.0, np.max(np.abs(tv)))
    assert abs(phi(z) - tv[0]) < 1e-10 * scale
    assert abs(star(z) - tv[1]) < 1e-10 * scale


def test_norm_factor_is_rho_product(rng):
    al = coeffs.random_alphas(rng, 6)
    monic, _ = opuc.monic_polys(al, 6)
    ortho, _ = opuc.orthonormal_polys(al, 6)
    np.testing.assert_allclose(ortho.coeffs * np.prod(np.sqrt(1 - np.abs(al) ** 2)), monic.coeffs)


def test_sequence_input(rng):
    s = coeffs.random_periodic(rng, 3)
    phi, _ = opuc.monic_polys(s, 5)
    ref, _ = opuc.monic_polys(s.positions(0, 5), 5)
    np.testing.assert_array_equal(phi.coeffs, ref.coeffs)


def test_zeros_inside_diagnostic(rng):
    for n in range(1, 7):
        phi, _ = opuc.monic_polys(coeffs.random_alphas(rng, n), n)
        assert opuc.zeros_inside_diagnostic(phi)["inside"]
    outside = PolyCoeffs(np.array([-2.0, 1.0]))  # zero at z = 2
    assert not opuc.zeros_inside_diagnostic(outside)["inside"]


@pytest.mark.parametrize("p", [2, 4, 3])
def test_experimental_transfer_discriminant(rng, p):
    # reported, not relied on: compare against the determinant route
    s = coeffs.random_periodic(rng, p)
    for th in np.linspace(0.1, 6.0, 7):
        z = np.exp(1j * th)
        assert abs(opuc.transfer_discriminant(s, z) - ham.discriminant(s, z)) < 1e-10
