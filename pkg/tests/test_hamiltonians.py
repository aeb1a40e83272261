import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmvlax import cmv, coeffs, hamiltonians as ham, poisson
from cmvlax.coeffs import VerblunskySequence as V
from cmvlax.errors import CmvError, DimensionTooLarge, WindowTooSmall, ZeroArgument
from cmvlax.hamiltonians import HamiltonianSpec


@pytest.mark.parametrize("text,kind,n", [("AL", "AL", 0), ("K0", "K0", 0), ("logK0", "LogK0", 0),
                                         ("K:3", "K", 3), ("Kbar:1", "Kbar", 1), ("ReK:2", "ReK", 2),
                                         ("ImK:4", "ImK", 4)])
def test_spec_parse(text, kind, n):
    spec = HamiltonianSpec.parse(text)
    assert (spec.kind, spec.n) == (kind, n)
    assert HamiltonianSpec.parse(str(spec)) == spec


@pytest.mark.parametrize("bad", ["K", "K:0", "Foo:2", "ReK:x", ""])
def test_spec_parse_rejects(bad):
    with pytest.raises(CmvError):
        HamiltonianSpec.parse(bad)


def test_K_examples():
    for n in (1, 2, 3, 4):
        assert ham.K(n, V.periodic([0, 0, 0, 0])) == 0
    assert abs(ham.K(1, V.periodic([0.5, 0.3])) - (-0.30)) < 1e-15


@pytest.mark.parametrize("p", [1, 2, 3, 4, 6])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_K_d_independence(p, n):
    s = coeffs.random_periodic(np.random.default_rng(10 * p + n), p)
    base = ham.K(n, s)
    d = poisson.min_copies(s, n)
    assert abs(base - ham.K(n, s, d + 2)) < 1e-12
    assert abs(base - ham.K_diagonal(n, s)) < 1e-12


def test_K0_examples():
    assert abs(ham.K0(V.periodic([0.6, 0.8])) - 0.2304) < 1e-15
    assert ham.K0(V.periodic([0, 0])) == 1
    assert abs(ham.K0(V.finite([0.6, 0, -1])) - 0.64) < 1e-15
    assert ham.K0_full_finite(V.finite([0.6, 0, -1])) == 0


def test_K0_odd_period_counts_raw_values():
    s = V.periodic([0.6, 0.8, 0.0])
    assert abs(ham.K0(s) - 0.2304) < 1e-15


def test_K_finite_examples(rng):
    assert abs(ham.K_finite(1, V.finite([0.6, -1])) - 1.2) < 1e-15
    assert ham.K_finite(1, V.finite([0, -1])) == 0
    fin = coeffs.random_finite(rng, 5)
    # periodizing needs the unvalidated builder: |alpha_{k-1}| = 1 is not a periodic value
    with pytest.raises(CmvError):
        V.periodic(fin.alphas)


def test_K_finite_via_decomposition(rng):
    fin = coeffs.random_finite(rng, 4)
    c = cmv.build_finite_cmv(fin)[0]
    for d in (1, 2, 3):
        q = cmv.floquet_from_alphas(fin.alphas, d)
        for n in (1, 2, 3):
            k_per = np.trace(np.linalg.matrix_power(q, n)) / (d * n)
            assert abs(k_per - ham.K_finite(n, fin)) < 1e-13
    assert c.shape == (4, 4)


def test_K_infinite_examples():
    r = ham.K_infinite(1, V.infinite([0.5]))
    assert abs(r.value - 0.5) < 1e-15 and r.tail_bound == 0
    assert ham.K_infinite(3, V.infinite([0, 0, 0])).value == 0
    with pytest.raises(WindowTooSmall):
        ham.K_infinite(2, V.infinite([0.1, 0.2]), window=5)


def test_K_infinite_window_independent(rng):
    s = V.infinite(coeffs.random_alphas(rng, 5))
    for n in (1, 2, 3):
        w0 = 5 + 2 * n
        ref = ham.K_infinite(n, s, w0)
        assert ref.tail_bound == 0
        for w in (w0 + 1, w0 + 7, 2 * w0):
            assert ham.K_infinite(n, s, w).value == ref.value


def test_grad_K_finite_vs_fd(rng):
    fin = coeffs.random_finite(rng, 6)
    for n in (1, 2, 3):
        g = ham.grad_K_finite(n, fin)
        fd = poisson.fd_gradient(lambda t: ham.K_finite(n, t), fin)
        assert g.max_abs_diff(fd) < 1e-6


@pytest.mark.parametrize("text", ["K:2", "Kbar:2", "ReK:3", "ImK:1", "K0", "logK0", "AL"])
def test_gradient_dispatch_vs_fd(text):
    s = coeffs.random_periodic(np.random.default_rng(5), 4)
    spec = HamiltonianSpec.parse(text)
    g = ham.gradient(spec, s)
    fd = poisson.fd_gradient(lambda t: ham.value(spec, t), s)
    assert g.max_abs_diff(fd) < 1e-6


def test_char_poly_examples(rng):
    np.testing.assert_allclose(ham.char_poly_coeffs(np.eye(2)), [1, -2, 1])
    np.testing.assert_allclose(ham.char_poly_coeffs(np.diag([2.0, 3.0])), [1, -5, 6])
    m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    u, _ = np.linalg.qr(m)
    assert abs(abs(ham.char_poly_coeffs(u)[-1]) - 1) < 1e-10
    np.testing.assert_allclose(np.sort_complex(np.roots(ham.char_poly_coeffs(u))),
                               np.sort_complex(np.linalg.eigvals(u)), atol=1e-8)
    with pytest.raises(DimensionTooLarge):
        ham.char_poly_coeffs(np.eye(257))


def test_discriminant_examples():
    z = V.periodic([0, 0])
    assert abs(ham.discriminant(z, 1) - 2) < 1e-15
    assert abs(ham.discriminant(z, 1j)) < 1e-15
    s = V.periodic([0.5, 0.3])
    expect = 2 / (np.sqrt(0.75) * np.sqrt(0.91)) * (1 + 0.15)
    assert abs(ham.discriminant(s, 1) - expect) < 1e-10
    with pytest.raises(ZeroArgument):
        ham.discriminant(s, 0)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3, 4, 6]), st.integers(0, 2**31 - 1))
def test_discriminant_poly_symmetry(p, seed):
    s = coeffs.random_periodic(np.random.default_rng(seed), p)
    dp = ham.discriminant_poly(s)
    c = dp.coeffs
    P = s.effective_period
    assert c.size == P + 1
    assert abs(c[0] - 1) < 1e-12 and abs(c[-1] - 1) < 1e-10
    np.testing.assert_allclose(c, np.conj(c[::-1]), atol=1e-10)
    assert abs(dp.rho_product**2 - np.prod(1 - np.abs(s.alphas) ** 2)) < 1e-12


def test_discriminant_real_on_circle_for_real_pairs(rng):
    a, b = rng.uniform(-0.9, 0.9, 2)
    s = V.periodic([a, b])
    for th in np.linspace(0, 2 * np.pi, 17):
        assert abs(ham.discriminant(s, np.exp(1j * th)).imag) < 1e-10


def test_invariant_vector_examples(rng):
    np.testing.assert_allclose(ham.invariant_vector(V.periodic([0, 0])), [0, 1], atol=1e-15)
    for p in (2, 4, 6, 3):
        s = coeffs.random_periodic(rng, p)
        assert ham.invariant_vector(s).size == s.effective_period


def test_kof1_branches(rng):
    for p in (4, 6):
        s = coeffs.random_periodic(rng, p)
        q = cmv.build_floquet(s, 1)
        for n in range(1, p // 2):
            assert abs(np.trace(np.linalg.matrix_power(q, n)) / n - ham.K(n, s)) < 1e-10
        n = p // 2
        lhs = 2 / p * np.trace(np.linalg.matrix_power(q, n))
        assert abs(lhs - ham.K(n, s) - 2 * np.sqrt(ham.K0(s))) < 1e-10


def test_kof1_zero_sequence_exact():
    s = V.periodic([0, 0, 0, 0])
    q = cmv.build_floquet(s, 1)
    assert 2 / 4 * np.trace(q @ q) == 2
    assert ham.K(2, s) == 0


def test_pairwise_commutation(rng):
    s = coeffs.random_periodic(rng, 4)
    ks = {n: ham.K_observable(n) for n in (1, 2, 3)}
    kb = {n: ham.observable(HamiltonianSpec("Kbar", n)) for n in (1, 2, 3)}
    k0 = ham.observable(HamiltonianSpec("K0"))
    for n in (1, 2, 3):
        assert abs(poisson.bracket(k0, ks[n], s)) < 1e-8
        for m in (1, 2, 3):
            assert abs(poisson.bracket(ks[n], ks[m], s)) < 1e-8
            assert abs(poisson.bracket(ks[n], kb[m], s)) < 1e-8
