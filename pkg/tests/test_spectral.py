import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from subtrack.errors import DimensionError
from subtrack.spectral import (
    empty_basis,
    orthonormalize,
    proj_residual_norm,
    proj_residual_trace,
    spectral_norm,
    subspace_distance_sq,
    sym_eig,
    uevt,
)

from conftest import gram_schmidt_complement, oracle_eigvals, oracle_spectral_norm, random_basis, random_symmetric


# -- sym_eig --------------------------------------------------------------

def test_sym_eig_identity():
    values, vectors = sym_eig(np.eye(3))
    assert np.allclose(values, 1.0)
    assert np.allclose(vectors.T @ vectors, np.eye(3), atol=1e-12)


def test_sym_eig_diagonal_gives_permuted_standard_basis():
    values, vectors = sym_eig(np.diag([5.0, 2.0, -1.0]))
    assert np.allclose(values, [5, 2, -1])
    assert np.allclose(vectors, np.eye(3))


def test_sym_eig_matches_general_solver(rng):
    m = random_symmetric(rng, 6)
    values, vectors = sym_eig(m)
    assert np.allclose(values, oracle_eigvals(m), atol=1e-8)
    assert np.allclose((vectors * values) @ vectors.T, m, atol=1e-10)


def test_sym_eig_sign_convention():
    m = np.array([[2.0, -1.0], [-1.0, 2.0]])
    _, vectors = sym_eig(m)
    for col in vectors.T:
        first = col[np.abs(col) > 1e-12][0]
        assert first >= 0


def test_sym_eig_rejects_nonsymmetric():
    with pytest.raises(DimensionError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DimensionError):
        sym_eig(np.ones((2, 3)))


sym_mats = st.integers(1, 8).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-10, 10, allow_nan=False, width=32))
).map(lambda a: a + a.T)


@settings(max_examples=60, deadline=None)
@given(sym_mats)
def test_sym_eig_invariants(m):
    values, vectors = sym_eig(m)
    n = m.shape[0]
    assert np.all(np.diff(values) <= 1e-12)
    assert np.allclose(vectors.T @ vectors, np.eye(n), atol=1e-8)
    scale = max(np.linalg.norm(m), 1.0)
    assert np.linalg.norm((vectors * values) @ vectors.T - m) <= 1e-6 * scale


# -- uevt -----------------------------------------------------------------

def test_uevt_zero_matrix():
    res = uevt(np.zeros((4, 4)), 1.0)
    assert res.rank == 0
    assert res.basis.shape == (4, 0)
    assert not res.approx.any()


def test_uevt_single_retained():
    res = uevt(np.diag([5.0, 2.0, -1.0]), 3.0)
    assert res.rank == 1
    assert np.allclose(res.approx, np.diag([5.0, 0.0, 0.0]))


def test_uevt_strict_threshold():
    res = uevt(np.diag([3.0, 2.0]), 3.0)
    assert res.rank == 0


def test_uevt_median_threshold_matches_reconstruction(rng):
    m = random_symmetric(rng, 8)
    w, v = scipy_eigh(m)
    h = float(np.median(w))
    keep = w > h
    expected = v[:, keep] @ np.diag(w[keep]) @ v[:, keep].T
    res = uevt(m, h)
    assert res.rank == int(keep.sum())
    assert np.allclose(res.approx, expected, atol=1e-8)


def scipy_eigh(m):
    return scipy.linalg.eigh(m, driver="ev")


@settings(max_examples=40, deadline=None)
@given(sym_mats)
def test_uevt_minus_infinity_reproduces_input(m):
    res = uevt(m, -np.inf)
    assert np.linalg.norm(res.approx - m) <= 1e-8 * max(1.0, np.linalg.norm(m))
    assert res.rank == m.shape[0]


# -- spectral_norm ----------------------------------------------------------

def test_spectral_norm_examples(rng):
    assert spectral_norm(np.zeros((3, 3))) == 0
    assert spectral_norm(np.diag([3.0, -7.0])) == pytest.approx(7.0)
    m = random_symmetric(rng, 5)
    assert spectral_norm(m) == pytest.approx(np.sqrt(oracle_eigvals(m @ m)[0]), abs=1e-10)


# -- residual norm / trace --------------------------------------------------

def test_proj_residual_norm_own_range(rng):
    v = random_basis(rng, 7, 3)
    m = v @ np.diag([4.0, 2.0, 1.0]) @ v.T
    assert proj_residual_norm(v, m) <= 1e-8


def test_proj_residual_norm_empty_basis():
    assert proj_residual_norm(empty_basis(2), np.diag([2.0, 1.0])) == pytest.approx(2.0)


def test_proj_residual_norm_explicit_complement(rng):
    v = random_basis(rng, 9, 3)
    m = random_symmetric(rng, 9)
    comp = gram_schmidt_complement(v)
    assert proj_residual_norm(v, m) == pytest.approx(oracle_spectral_norm(comp.T @ m), abs=1e-8)


def test_proj_residual_norm_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        proj_residual_norm(random_basis(rng, 4, 2), np.eye(5))


def test_proj_residual_trace_examples(rng):
    m = random_symmetric(rng, 4)
    assert proj_residual_trace(np.eye(4), m) == pytest.approx(0.0, abs=1e-12)
    assert proj_residual_trace(empty_basis(3), np.diag([1.0, 2.0, 3.0])) == pytest.approx(6.0)
    v = random_basis(rng, 10, 4)
    m = random_symmetric(rng, 10)
    comp = gram_schmidt_complement(v)
    assert proj_residual_trace(v, m) == pytest.approx(np.trace(comp.T @ m @ comp), abs=1e-10)


# -- subspace distance --------------------------------------------------------

def test_subspace_distance_examples(rng):
    u = random_basis(rng, 6, 2)
    assert subspace_distance_sq(u, u) == pytest.approx(0.0, abs=1e-12)
    e = np.eye(3)
    assert subspace_distance_sq(e[:, :1], e[:, 1:2]) == pytest.approx(2.0)
    v = random_basis(rng, 6, 3)
    diff = u @ u.T - v @ v.T
    direct = sum(diff[i, j] ** 2 for i in range(6) for j in range(6))
    assert subspace_distance_sq(u, v) == pytest.approx(direct, abs=1e-10)


def test_subspace_distance_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        subspace_distance_sq(random_basis(rng, 4, 1), random_basis(rng, 5, 1))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 4), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_subspace_distance_symmetric_and_rotation_invariant(n, ru, rv, seed):
    rng = np.random.default_rng(seed)
    ru, rv = min(ru, n), min(rv, n)
    u, v = random_basis(rng, n, ru), random_basis(rng, n, rv)
    d = subspace_distance_sq(u, v)
    assert d == pytest.approx(subspace_distance_sq(v, u), abs=1e-10)
    if ru:
        q = random_basis(rng, ru, ru)
        assert subspace_distance_sq(u @ q, v) == pytest.approx(d, abs=1e-8)
    if rv:
        q = random_basis(rng, rv, rv)
        assert subspace_distance_sq(u, v @ q) == pytest.approx(d, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_residual_norm_bounded_by_spectral_norm(n, r, seed):
    rng = np.random.default_rng(seed)
    v = random_basis(rng, n, min(r, n))
    m = random_symmetric(rng, n, -5, 5)
    assert proj_residual_norm(v, m) <= spectral_norm(m) * (1 + 1e-12) + 1e-12


def test_orthonormalize_rank_deficient(rng):
    x = rng.standard_normal((6, 2))
    q = orthonormalize(np.column_stack([x, x @ [1.0, 2.0]]))
    assert q.shape == (6, 2)
    assert np.allclose(q.T @ q, np.eye(2))
