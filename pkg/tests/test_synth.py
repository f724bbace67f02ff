import numpy as np
import pytest
from hypothesis import given, strategies as st

from mvcema.errors import DegenerateSpec, InfeasibleFloor, ValidationError
from mvcema.synth import (LognormalEmSpec, MixingSpec, default_em_specs, default_grid,
                          make_dataset, make_end_members, mix, sample_abundances,
                          two_source_em_specs)


def test_default_end_members():
    G = make_end_members(default_em_specs())
    assert G.shape == (3, 100)
    assert np.all(G >= 0)
    assert np.allclose(G.sum(axis=1), 1.0, atol=1e-14)
    assert np.linalg.matrix_rank(G) == 3
    modes = np.argmax(G, axis=1)
    assert len(set(modes)) == 3


def test_mode_parameterization_peaks_at_mode():
    grid = default_grid(400)
    spec = LognormalEmSpec.from_mode(30.0, 0.5, grid)
    peak = grid[np.argmax(spec.density())]
    assert abs(np.log(peak) - np.log(30.0)) < np.log(grid[1] / grid[0])


def test_two_sources_unimodal_distinct():
    G = make_end_members(two_source_em_specs())
    assert G.shape == (2, 100)
    for row in G:
        d = np.sign(np.diff(row))
        d = d[d != 0]
        assert np.count_nonzero(np.diff(d)) == 1    # rises then falls
    assert np.argmax(G[0]) != np.argmax(G[1])


def test_duplicate_spec_rejected():
    s = default_em_specs()
    with pytest.raises(DegenerateSpec):
        make_end_members([s[0], s[0]])
    with pytest.raises(ValidationError):
        make_end_members([s[0]])
    with pytest.raises(ValidationError):
        make_end_members([s[0], LognormalEmSpec(1.0, 0.5, default_grid(50))])
    with pytest.raises(ValidationError):
        LognormalEmSpec(1.0, 0.0, default_grid())


@given(st.integers(0, 2**31), st.sampled_from([2, 3, 4]), st.floats(0.0, 0.24))
def test_abundance_floor_exact(seed, K, f):
    W = sample_abundances(MixingSpec(200, f, seed), K)
    assert W.shape == (200, K)
    assert W.min() >= f
    assert np.all(np.abs(W.sum(axis=1) - 1.0) <= 1e-12)


def test_abundance_examples():
    W = sample_abundances(MixingSpec(200, 0.25, 1), 3)
    assert W.min() >= 0.25 and W.max() <= 0.5
    W = sample_abundances(MixingSpec(99, 0.13, 1), 2)
    assert W.min() >= 0.13 and W.max() <= 0.87
    W = sample_abundances(MixingSpec(200, 0.0, 1), 3)
    assert W.min() >= 0.0


def test_infeasible_floor():
    with pytest.raises(InfeasibleFloor):
        sample_abundances(MixingSpec(10, 0.5, 0), 2)


def test_abundances_are_seeded():
    a = sample_abundances(MixingSpec(50, 0.1, 9), 3)
    b = sample_abundances(MixingSpec(50, 0.1, 9), 3)
    c = sample_abundances(MixingSpec(50, 0.1, 10), 3)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_mix_exact_and_identity():
    G = make_end_members(default_em_specs())
    W = sample_abundances(MixingSpec(40, 0.1, 0), 3)
    P = mix(G, W)
    assert np.array_equal(P, W @ G)
    assert np.linalg.matrix_rank(P) == 3
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-14)
    assert np.array_equal(mix(G, np.eye(3)), G)


def test_mix_with_noise_stays_valid():
    G = make_end_members(default_em_specs())
    W = sample_abundances(MixingSpec(40, 0.0, 0), 3)
    P = mix(G, W, noise_sd=1e-3, seed=4)
    assert P.min() >= 0
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(P, mix(G, W, noise_sd=1e-3, seed=4))


def test_two_source_protocol():
    P, W, G = make_dataset(two_source_em_specs(), MixingSpec(99, 0.13, 3))
    assert P.shape == (99, 100)
    assert np.linalg.matrix_rank(P) == 2
    assert np.all(W.min(axis=1) > 0)     # no specimen is a pure source
