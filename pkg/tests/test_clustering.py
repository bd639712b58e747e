import warnings

import numpy as np
import pytest
from scipy.spatial import cKDTree

from src.core.errors import DegenerateDataError, InvalidArgumentError, TooManyCandidatesError
from src.domains.clustering.schemas import OUTLIER, SpaceSource
from src.domains.clustering.service import ClusteringService

clustering_service = ClusteringService()


def test_epsilon_rule_one_dimension():
    points = np.arange(10, dtype=float)[:, None]
    assert clustering_service.epsilon_rule(points) == pytest.approx(4.0)


def test_epsilon_rule_uses_range_term():
    xs, ys = np.meshgrid(np.arange(10.0), np.arange(10.0))
    points = np.column_stack([xs.ravel(), ys.ravel()])
    # 0.1 * (p - 1) * 9 = 0.9 beats the corner's fourth-neighbour distance of 2
    assert clustering_service.epsilon_rule(points) == pytest.approx(0.9)


def test_epsilon_rule_range_term_wins_over_outlier():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [10.0, 10.0]])
    assert clustering_service.epsilon_rule(points) == pytest.approx(1.0)


def test_epsilon_rule_is_shift_invariant_and_scale_equivariant():
    points = np.random.default_rng(1).standard_normal((50, 3))
    base = clustering_service.epsilon_rule(points)
    assert clustering_service.epsilon_rule(points + 3.7) == pytest.approx(base, rel=1e-12)
    assert clustering_service.epsilon_rule(2.5 * points) == pytest.approx(2.5 * base, rel=1e-12)


def test_epsilon_rule_rejects_identical_points():
    with pytest.raises(DegenerateDataError):
        clustering_service.epsilon_rule(np.ones((20, 2)))


def test_epsilon_rule_needs_enough_points():
    with pytest.raises(InvalidArgumentError):
        clustering_service.epsilon_rule(np.random.default_rng(0).standard_normal((4, 2)))


def test_dbscan_finds_blobs_and_outliers(blobs):
    points = np.vstack([blobs, [[20.0, -20.0]]])
    model = clustering_service.dbscan_fit(points, epsilon=0.5, m_p=5)
    assert model.n_clusters == 2
    assert model.labels[-1] == OUTLIER
    assert len(set(model.labels[:200]) - {OUTLIER}) == 1
    assert len(set(model.labels[200:400]) - {OUTLIER}) == 1


def test_core_points_have_enough_neighbours(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.4, m_p=5)
    tree = cKDTree(blobs)
    for point in blobs[model.core_flags]:
        # the point itself counts towards m_p
        assert len(tree.query_ball_point(point, r=0.4)) >= 5


def _same_cluster(labels):
    return labels[:, None] == labels[None, :]


def test_dbscan_core_partition_is_order_independent(blobs):
    order = np.random.default_rng(4).permutation(blobs.shape[0])
    model = clustering_service.dbscan_fit(blobs, epsilon=0.4, m_p=5)
    shuffled = clustering_service.dbscan_fit(blobs[order], epsilon=0.4, m_p=5)
    np.testing.assert_array_equal(shuffled.core_flags, model.core_flags[order])
    assert shuffled.n_clusters == model.n_clusters
    core = model.core_flags[order]
    np.testing.assert_array_equal(
        _same_cluster(shuffled.labels[core]), _same_cluster(model.labels[order][core])
    )


def test_dbscan_rejects_bad_parameters(blobs):
    with pytest.raises(InvalidArgumentError):
        clustering_service.dbscan_fit(blobs, epsilon=0.0)
    with pytest.raises(InvalidArgumentError):
        clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=0)


def test_membership_of_core_points_and_far_points(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=5)
    np.testing.assert_array_equal(clustering_service.membership(model, model.core_points), model.core_labels)
    assert clustering_service.is_member(model, np.array([50.0, 50.0])) == OUTLIER
    first = model.labels[np.argmin(np.linalg.norm(blobs, axis=1))]
    assert clustering_service.is_member(model, np.array([0.0, 0.0])) == first


def test_equidistant_point_joins_lowest_cluster_id():
    right = np.column_stack([1.0 + 0.1 * np.arange(5), np.zeros(5)])
    model = clustering_service.dbscan_fit(np.vstack([right, -right]), epsilon=1.05, m_p=5)
    assert model.n_clusters == 2
    assert model.labels[0] == 1
    assert clustering_service.is_member(model, np.array([0.0, 0.0])) == 1

    # same clusters, ids swapped by input order
    swapped = clustering_service.dbscan_fit(np.vstack([-right, right]), epsilon=1.05, m_p=5)
    assert clustering_service.is_member(swapped, np.array([0.0, 0.0])) == 1


def test_membership_of_far_points_raises_no_warnings(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=5)
    X = np.array([[50.0, 50.0], [0.0, 0.0], [-40.0, 3.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        labels = clustering_service.membership(model, X)
    assert labels[0] == OUTLIER
    assert labels[2] == OUTLIER


def test_membership_without_core_points():
    model = clustering_service.dbscan_fit(np.array([[0.0, 0.0], [10.0, 10.0]]), epsilon=0.1, m_p=5)
    assert model.n_clusters == 0
    np.testing.assert_array_equal(clustering_service.membership(model, np.zeros((3, 2))), [0, 0, 0])


@pytest.mark.parametrize("p, expected", [(1, 199_999), (2, 446), (7, 4), (20, 0)])
def test_default_grid_partitions(p, expected):
    assert clustering_service.default_grid_partitions(p) == expected


def test_grid_design_space_stays_inside_clusters(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=5)
    space = clustering_service.grid_design_space(model, L=30)
    assert space.source == SpaceSource.grid
    assert 0 < space.size < 31 ** 2
    assert np.all(clustering_service.membership(model, space.points) != OUTLIER)


def test_grid_budget_is_enforced(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=5)
    with pytest.raises(TooManyCandidatesError):
        clustering_service.grid_design_space(model, L=10, budget=100)
    with pytest.raises(InvalidArgumentError):
        clustering_service.grid_design_space(model, L=1)


def test_mh_quota():
    assert clustering_service.mh_quota(2) == 20
    assert clustering_service.mh_quota(7) == 145


def test_mh_design_space_is_seeded_and_inside_clusters(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=5)
    first = clustering_service.mh_design_space(model, seed=1)
    again = clustering_service.mh_design_space(model, seed=1)
    other = clustering_service.mh_design_space(model, seed=2)
    np.testing.assert_array_equal(first.points, again.points)
    assert not np.array_equal(first.points, other.points)
    assert first.source == SpaceSource.mh
    assert first.size <= model.n_clusters * clustering_service.mh_quota(2)
    assert np.all(clustering_service.membership(model, first.points) != OUTLIER)


def test_mh_design_space_covers_every_cluster(blobs):
    model = clustering_service.dbscan_fit(blobs, epsilon=0.5, m_p=5)
    labels = set(clustering_service.membership(model, clustering_service.mh_design_space(model, seed=3).points))
    assert labels == {1, 2}


def test_full_sample_space_drops_duplicates():
    X = np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0], [3.0, 3.0]])
    space = clustering_service.full_sample_design_space(X)
    np.testing.assert_array_equal(space.points, [[1.0, 2.0], [0.0, 0.0], [3.0, 3.0]])
    assert space.source == SpaceSource.full_sample
