import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from excitonnet.superop import complex_generator, full_moments, real_basis, real_split, unvec, vec

from conftest import random_model


def _hermitian(a, b):
    m = a + 1j * b
    return m + m.conj().T


finite = st.floats(-1, 1, allow_nan=False)


def test_vec_identity():
    rng = np.random.default_rng(0)
    a, x, b = (rng.standard_normal((4, 4)) for _ in range(3))
    np.testing.assert_allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x), atol=1e-12)
    np.testing.assert_array_equal(unvec(vec(x), 4), x)


def test_real_basis_roundtrip():
    to_real, to_vec, pairs = real_basis(5)
    rng = np.random.default_rng(1)
    rho = _hermitian(rng.standard_normal((5, 5)), rng.standard_normal((5, 5)))
    x = to_real @ vec(rho)
    assert np.abs(x.imag).max() < 1e-15
    np.testing.assert_allclose(to_vec @ x.real, vec(rho), atol=1e-14)
    assert len(pairs) == 10


@given(arrays(float, (7, 7), elements=finite), arrays(float, (7, 7), elements=finite),
       st.floats(0, 100), st.floats(0, 100))
def test_real_generator_matches_complex(a, b, sink, gamma):
    m = random_model(0)
    split = real_split(m.hamiltonian, sink)
    r = split.generators([gamma])[0]
    to_real, to_vec, _ = real_basis(7)
    ref = (to_real @ complex_generator(m.hamiltonian, sink, gamma) @ to_vec)
    assert np.abs(ref.imag).max() < 1e-12
    np.testing.assert_allclose(r, ref.real, atol=1e-12)
    rho = _hermitian(a, b)
    np.testing.assert_allclose(to_vec @ (r @ (to_real @ vec(rho)).real),
                               complex_generator(m.hamiltonian, sink, gamma) @ vec(rho), atol=1e-10)


def test_full_moments_singular_row_is_nan():
    m = random_model(1)
    r = real_split(m.hamiltonian, m.sink_rate).generators([0.0, 1.0])
    r[0] = 0.0
    tau, sigma, r1, r2 = full_moments(r)
    assert np.all(np.isnan(tau[0])) and np.all(np.isfinite(tau[1]))
    assert r1[1] < 1e-12
