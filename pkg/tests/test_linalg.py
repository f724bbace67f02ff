import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvcema.errors import NonSymmetric, RankDeficient, ValidationError
from mvcema.linalg import (check_symmetric, det_psd, gram, null_space, spectral_upper_bound,
                           volume_factors)
from oracles import random_simplex_rows

seeds = st.integers(0, 2**32 - 1)


def test_gram_is_symmetric_psd(rng):
    A = rng.standard_normal((4, 9))
    S = gram(A)
    assert S.shape == (4, 4)
    assert np.array_equal(S, S.T)
    assert np.linalg.eigvalsh(S).min() > -1e-12


@given(seeds, st.integers(1, 6))
def test_det_psd_matches_numpy(seed, K):
    rng = np.random.default_rng(seed)
    S = gram(rng.standard_normal((K, K + 3)))
    assert det_psd(S) == pytest.approx(np.linalg.det(S), rel=1e-9)


def test_det_psd_singular_falls_back_and_clamps():
    S = gram(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))
    d = det_psd(S)
    assert d == 0.0 or abs(d) < 1e-12
    assert det_psd(np.zeros((2, 2))) == 0.0


def test_det_psd_identity():
    assert det_psd(np.eye(3)) == 1.0


def test_nonsymmetric_rejected():
    with pytest.raises(NonSymmetric):
        det_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(NonSymmetric):
        check_symmetric(np.ones((2, 3)))


@given(seeds, st.sampled_from([(1, 3), (2, 5), (4, 10), (5, 100)]))
def test_null_space_basis(seed, shape):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal(shape)
    ns = null_space(A)
    C = ns.basis
    assert ns.dim == shape[1] - shape[0]
    assert np.allclose(A @ C, 0.0, atol=1e-10)
    assert np.allclose(C.T @ C, np.eye(ns.dim), atol=1e-10)
    P = ns.projector()
    assert np.allclose(P @ P, P, atol=1e-10)


def test_null_space_rank_deficient():
    with pytest.raises(RankDeficient):
        null_space(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))


def test_null_space_needs_wide_matrix():
    with pytest.raises(ValidationError):
        null_space(np.eye(3))


def test_spectral_upper_bound(rng):
    A = rng.standard_normal((5, 5))
    S = A + A.T
    top = np.linalg.eigvalsh(S)[-1]
    assert spectral_upper_bound(S) >= top
    assert spectral_upper_bound(S) == pytest.approx(top, rel=1e-10)


@given(seeds, st.sampled_from([2, 3, 5]), st.sampled_from([10, 100]))
def test_volume_factors_expand_determinant(seed, K, J):
    rng = np.random.default_rng(seed)
    G = random_simplex_rows(rng, K, J)
    full = det_psd(gram(G))
    for k in range(K):
        d, q = volume_factors(G, k)
        assert d * q == pytest.approx(full, rel=1e-8)
