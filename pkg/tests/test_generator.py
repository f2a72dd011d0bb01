import math

import numpy as np
import pytest

from subtrack.errors import OutOfRangeError, ValidationError
from subtrack.generator import (
    B1,
    B2,
    W1,
    W2,
    GroundTruth,
    ScenarioParams,
    _sample_layers,
    build_scenario,
    build_stationary,
    build_toy,
    population_squares,
    population_window,
    scenario_params,
)
from subtrack.spectral import orthonormalize, subspace_distance_sq
from subtrack.statistics import pi_proj_hat


def test_connectivity_matrices():
    # entry-by-entry expansion of W diag(d) W^T
    def entry(w, d, i, j):
        return sum(w[i, k] * d[k] * w[j, k] for k in range(3))

    for w, d, b in [(W1, (1, 0.5, 0.5), B1), (W2, (1, 0.5, -0.5), B2)]:
        for i in range(3):
            for j in range(3):
                assert b[i, j] == pytest.approx(entry(w, d, i, j), abs=1e-14)
        assert np.allclose(b, b.T)
        assert b.min() >= 0 and b.max() <= 1
    assert B2[0, 0] == pytest.approx(0.125)
    assert B1[0, 0] == pytest.approx(0.78125)
    assert np.linalg.matrix_rank(B1[:2, :2]) == 2 and np.linalg.matrix_rank(B2[:2, :2]) == 2


def test_scenario_change_points():
    p = ScenarioParams(n=100, T=200, s=0.1)
    assert p.change_points == (20, 100, 150)
    assert scenario_params("I", "1/15", 100, 200).change_points == (13, 100, 150)
    assert scenario_params("III", "80/n", 100, 150).rho == pytest.approx(0.8)
    assert scenario_params("II", 0.3, 100, 50).q == pytest.approx(0.3)


@pytest.mark.parametrize("kw", [dict(s=0.3), dict(q=1.5), dict(rho=0.0), dict(T=4)])
def test_scenario_params_validation(kw):
    base = dict(n=30, T=100)
    base.update(kw)
    with pytest.raises(ValidationError):
        ScenarioParams(**base)


def test_tiny_rho_gives_empty_sequence():
    _, g = build_scenario(ScenarioParams(n=20, T=8, rho=1e-6, seed=4))
    assert not g.layers.any()


def test_collapsed_cluster_is_rejected():
    with pytest.raises(ValidationError, match="emptied a cluster"):
        build_scenario(ScenarioParams(n=7, T=40, seed=7))


@pytest.mark.parametrize("n", [10, 50, 100])
def test_memberships(n):
    gt, _ = build_scenario(ScenarioParams(n=n, T=40, seed=n))
    for k in range(4):
        z = gt.membership(k)
        assert np.all(z.sum(axis=1) == 1)
    r = math.floor(0.3 * n + 0.5)
    assert sorted(np.bincount(gt.labels[0])) == sorted([r, r, n - 2 * r])
    assert np.array_equal(gt.labels[3], gt.labels[1])
    assert gt.segment_ranks[2] == 2


@pytest.mark.parametrize("q", [0.1, 0.3, 0.5])
@pytest.mark.parametrize("n", [30, 100])
def test_boundary_distances_positive(q, n):
    gt, _ = build_scenario(ScenarioParams(n=n, T=40, q=q, seed=11))
    bases = gt.segment_model().bases
    for a, b in zip(bases, bases[1:]):
        assert subspace_distance_sq(a, b) > 0


def test_segment_distance_matches_projector_difference():
    gt, _ = build_scenario(ScenarioParams(n=60, T=40, q=0.5, seed=2))
    # column spaces taken from Z B-average, built independently of segment_model
    bavg = 0.5 * (B1 + B2)
    v = [orthonormalize(gt.membership(k) @ bavg[: gt.segment_ranks[k], : gt.segment_ranks[k]])
         for k in range(2)]
    diff = v[0] @ v[0].T - v[1] @ v[1].T
    assert float((diff**2).sum()) > 0.1
    assert float((diff**2).sum()) == pytest.approx(
        subspace_distance_sq(*gt.segment_model().bases[:2]), abs=1e-9)


def test_probabilities_feasible_and_factorized():
    gt, _ = build_scenario(ScenarioParams(n=40, T=60, rho=0.7, seed=5))
    model = gt.segment_model()
    for t in range(1, gt.T + 1):
        p = gt.probability(t)
        assert p.min() >= 0 and p.max() <= 0.7 + 1e-12
        assert np.allclose(p, model.probability(t), atol=1e-12)
    with pytest.raises(OutOfRangeError):
        gt.probability(0)


def test_layer_density_matches_probability():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1, 2], [18, 18, 24])
    gt = GroundTruth(n=60, T=50, change_points=(), labels=[labels],
                     choices=np.zeros(50, dtype=int), rho=0.6)
    g = _sample_layers(gt, seed=int(rng.integers(1 << 30)))
    iu = np.triu_indices(60, 1)
    p = gt.probability(1)[iu]
    observed = g.layers[:, iu[0], iu[1]].mean()
    se = math.sqrt(50 * (p * (1 - p)).sum()) / (50 * p.size)
    assert abs(observed - p.mean()) <= 3 * se


def test_reproducible():
    p = ScenarioParams(n=50, T=60, seed=17)
    gt1, g1 = build_scenario(p)
    gt2, g2 = build_scenario(p)
    assert g1 == g2
    assert gt1.to_json() == gt2.to_json()
    _, g3 = build_scenario(ScenarioParams(n=50, T=60, seed=18))
    assert g3 != g1


def test_toy_structure():
    gt, g = build_toy()
    assert gt.change_points == (101, 201, 301)
    r = gt.segment_ranks
    assert r[0] > r[1] < r[2] == r[3]
    assert (g.n, g.T) == (100, 400)
    bases = gt.segment_model().bases
    assert all(subspace_distance_sq(a, b) > 0 for a, b in zip(bases, bases[1:]))


def test_toy_population_proj_zero_in_first_segment():
    gt, _ = build_toy()
    stack = population_squares(gt)
    v1 = gt.segment_model().bases[0]
    L = 20
    for l in range(2 * L + 1, 101):
        assert pi_proj_hat(stack[l - L:l].sum(axis=0), v1) <= 1e-8


def test_population_window():
    gt, _ = build_scenario(ScenarioParams(n=30, T=40, seed=1))
    p = gt.probability(7)
    assert np.array_equal(population_window(gt, 7, 1), p @ p)
    inside = population_window(gt, 9, 5)  # segment 1 is [1, 10)
    assert np.linalg.matrix_rank(inside, tol=1e-8 * np.abs(inside).max()) <= 3
    naive = np.zeros((30, 30))
    for t in range(18, 25):
        q = gt.probability(t)
        for i in range(30):
            for j in range(30):
                naive[i, j] += sum(q[i, k] * q[k, j] for k in range(30))
    assert np.allclose(population_window(gt, 24, 7), naive)
    with pytest.raises(OutOfRangeError):
        population_window(gt, 3, 4)


def test_stationary_builder():
    gt, g = build_stationary(40, 30, seed=2)
    assert gt.change_points == () and g.T == 30
    assert len(gt.segment_ranks) == 1
