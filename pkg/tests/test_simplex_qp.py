import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mvcema.errors import EmptyVector, NonSymmetric, ValidationError
from mvcema.simplex_qp import (PfgmSettings, QpProblem, pfgm_rows, project_rows, project_simplex,
                               solve_qp_simplex)
from oracles import central_difference, qp_face_enumeration, random_pd

vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3))


@given(vectors)
def test_projection_lands_on_simplex(v):
    x = project_simplex(v)
    assert x.min() >= 0.0
    assert abs(x.sum() - 1.0) < 1e-9


@given(vectors)
def test_projection_is_idempotent(v):
    x = project_simplex(v)
    assert np.allclose(project_simplex(x), x, atol=1e-12)


@given(vectors)
def test_projection_variational_inequality(v):
    # p is the projection iff <v - p, y - p> <= 0 for every simplex point y (vertices suffice)
    p = project_simplex(v)
    scale = max(1.0, np.abs(v).max())
    for j in range(len(v)):
        y = np.zeros(len(v))
        y[j] = 1.0
        assert (v - p) @ (y - p) <= 1e-9 * scale


def test_projection_examples():
    assert np.allclose(project_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    assert np.allclose(project_simplex([2.0, 0.0]), [1.0, 0.0])
    assert np.allclose(project_simplex([0.0, 0.0, 0.0]), [1 / 3] * 3)
    assert np.allclose(project_simplex([5.0]), [1.0])
    # ties are split evenly
    assert np.allclose(project_simplex([1.0, 1.0, -3.0]), [0.5, 0.5, 0.0])


def test_projection_rejects_bad_input():
    with pytest.raises(EmptyVector):
        project_simplex([])
    with pytest.raises(ValidationError):
        project_simplex([np.nan, 1.0])


def test_project_rows_matches_single(rng):
    V = rng.standard_normal((20, 7))
    X = project_rows(V)
    for v, x in zip(V, X):
        assert np.allclose(project_simplex(v), x)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_qp_matches_face_enumeration(seed, n):
    rng = np.random.default_rng(seed)
    Q = random_pd(rng, n, cond=50.0)
    b = rng.standard_normal(n) * rng.uniform(0.1, 20)
    prob = QpProblem(Q, b)
    _, f_star = qp_face_enumeration(Q, b)
    x, _ = solve_qp_simplex(prob, np.full(n, 1.0 / n), PfgmSettings(max_inner_iters=5000, rel_tol=1e-13))
    assert prob.objective(x) - f_star < 1e-6


def test_qp_gradient_matches_finite_differences(rng):
    Q = random_pd(rng, 5)
    b = rng.standard_normal(5)
    prob = QpProblem(Q, b)
    x = rng.dirichlet(np.ones(5))
    g = prob.gradient(x)
    assert np.allclose(central_difference(prob.objective, x), g, rtol=1e-6, atol=1e-8)


def test_qp_problem_validation():
    with pytest.raises(NonSymmetric):
        QpProblem(np.array([[1.0, 1.0], [0.0, 1.0]]), [0.0, 0.0])
    with pytest.raises(ValidationError):
        QpProblem(np.eye(2), [0.0, 0.0, 0.0])
    with pytest.raises(ValidationError):
        solve_qp_simplex(QpProblem(np.eye(2), [0.0, 0.0]), [0.7, 0.7])
    with pytest.raises(ValidationError):
        PfgmSettings(max_inner_iters=0)


def test_qp_interior_solution():
    # min x^T x on the simplex is the barycentre
    x, _ = solve_qp_simplex(QpProblem(np.eye(4), np.zeros(4)), [1.0, 0, 0, 0],
                            PfgmSettings(max_inner_iters=1000, rel_tol=1e-14))
    assert np.allclose(x, 0.25, atol=1e-8)


def test_qp_vertex_solution():
    x, _ = solve_qp_simplex(QpProblem(np.eye(3), np.array([10.0, 0.0, 0.0])), [1 / 3] * 3)
    assert np.allclose(x, [1.0, 0.0, 0.0])


def test_qp_never_increases_objective(rng):
    for _ in range(20):
        Q = random_pd(rng, 6, cond=1e4)
        b = rng.standard_normal(6)
        prob = QpProblem(Q, b)
        x0 = rng.dirichlet(np.ones(6))
        x, _ = solve_qp_simplex(prob, x0, PfgmSettings(max_inner_iters=3))
        assert prob.objective(x) <= prob.objective(x0) + 1e-12


def test_pfgm_rows_independent_of_batch(rng):
    Q = random_pd(rng, 4)
    B = rng.standard_normal((10, 4))
    X0 = rng.dirichlet(np.ones(4), size=10)
    apply_q = lambda X: np.einsum("ik,kl->il", X, Q)
    L = 2 * np.linalg.eigvalsh(Q)[-1]
    full, _ = pfgm_rows(apply_q, B, X0, L)
    for i in range(10):
        one, _ = pfgm_rows(apply_q, B[i:i + 1], X0[i:i + 1], L)
        assert np.array_equal(one[0], full[i])
