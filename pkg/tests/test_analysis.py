import numpy as np
import pytest

from dvg.analysis import (
    DvgDescriptor,
    boundary_node_mask,
    correspondences,
    descriptor,
    knn_search,
    pca_deform,
    pca_deform_grid,
    pca_fit,
)
from dvg.grid import regular_grid
from dvg.shape_io import SampledShape

from conftest import warped_grid


def knn_oracle(query_vec, db_vecs, k):
    """Exhaustive scan with explicit tie handling, written independently."""
    scored = []
    for i, v in enumerate(db_vecs):
        d = 0.0
        for a, b in zip(query_vec, v):
            d += (a - b) ** 2
        scored.append((d**0.5, i))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [i for _, i in scored[:k]]


def correspondence_oracle(src, tgt):
    """O(nm) loops, lowest index on ties."""
    out = []
    for t in tgt:
        best, best_d = 0, float("inf")
        for i, s in enumerate(src):
            d = float(np.sqrt(((t - s) ** 2).sum()))
            if d < best_d:
                best, best_d = i, d
        out.append(best)
    return out


# -- descriptors -----------------------------------------------------------------

def test_descriptor_r1_all_nodes():
    d = descriptor(regular_grid(1, 0.0, 1.0))
    assert d.vector.shape == (24,)


def test_descriptor_r2_boundary_only():
    g = regular_grid(2, 0.0, 1.0)
    d = descriptor(g)
    assert d.vector.shape == (78,)  # 26 boundary nodes
    mask = boundary_node_mask(2)
    assert mask.sum() == 26
    assert np.array_equal(d.vector, g.points[mask].ravel())


def test_descriptor_blind_to_interior():
    g = regular_grid(2, 0.0, 1.0)
    pts = g.points.copy()
    pts[g.idx(1, 1, 1)] += [0.2, -0.1, 0.3]  # interior-only change
    assert np.array_equal(descriptor(g).vector, descriptor(g.with_points(pts)).vector)
    pts2 = g.points.copy()
    pts2[g.idx(0, 1, 1)] += [0.05, 0.0, 0.0]  # boundary change
    assert not np.array_equal(descriptor(g).vector, descriptor(g.with_points(pts2)).vector)


def test_descriptor_length_validation():
    with pytest.raises(ValueError, match="length"):
        DvgDescriptor(resolution=2, vector=np.zeros(10))


# -- retrieval --------------------------------------------------------------------

def test_knn_self_query_first():
    db = [descriptor(warped_grid(2, seed=i)) for i in range(10)]
    ranked = knn_search(db[4], db, k=3)
    assert ranked[0] == 4


def test_knn_full_ranking_sorted():
    db = [descriptor(warped_grid(2, seed=i)) for i in range(12)]
    ranked = knn_search(db[0], db, k=len(db))
    dists = [np.linalg.norm(db[i].vector - db[0].vector) for i in ranked]
    assert all(b >= a for a, b in zip(dists, dists[1:]))


def test_knn_matches_bruteforce_oracle():
    rng = np.random.default_rng(0)
    db = [
        DvgDescriptor(resolution=1, vector=rng.random(24)) for _ in range(100)
    ]
    query = DvgDescriptor(resolution=1, vector=rng.random(24))
    got = knn_search(query, db, k=5)
    expected = knn_oracle(query.vector, [d.vector for d in db], 5)
    assert got == expected


def test_knn_tie_lower_index():
    v = np.zeros(24)
    db = [DvgDescriptor(resolution=1, vector=v.copy()) for _ in range(4)]
    assert knn_search(DvgDescriptor(resolution=1, vector=v), db, k=2) == [0, 1]


def test_knn_validation():
    db = [descriptor(regular_grid(1, 0.0, 1.0))]
    with pytest.raises(ValueError, match="k must be"):
        knn_search(db[0], db, k=2)
    with pytest.raises(ValueError, match="resolution"):
        knn_search(descriptor(regular_grid(2, 0.0, 1.0)), db, k=1)


# -- correspondences ---------------------------------------------------------------

def test_correspondences_identity_on_same_cloud():
    pts = np.random.default_rng(1).random((50, 3))
    corr = correspondences(pts, pts)
    assert np.array_equal(corr.source_index, np.arange(50))
    assert np.all(corr.distance == 0.0)


def test_correspondences_single_source():
    tgt = np.random.default_rng(2).random((20, 3))
    corr = correspondences(np.array([[0.5, 0.5, 0.5]]), tgt)
    assert np.all(corr.source_index == 0)


def test_correspondences_match_oracle_500x500():
    rng = np.random.default_rng(3)
    src = rng.random((500, 3))
    tgt = rng.random((500, 3))
    corr = correspondences(src, tgt)
    assert corr.source_index.tolist() == correspondence_oracle(src, tgt)


def test_correspondences_empty_errors():
    with pytest.raises(ValueError):
        correspondences(np.empty((0, 3)), np.random.random((3, 3)))


# -- PCA ----------------------------------------------------------------------------

def test_pca_identical_grids_zero_variance():
    g = warped_grid(2, seed=4)
    model = pca_fit([g, g, g])
    assert np.all(model.variances == pytest.approx(0.0, abs=1e-20))


def test_pca_rank1_family():
    g = regular_grid(2, 0.0, 1.0)
    rng = np.random.default_rng(5)
    direction = rng.standard_normal(g.points.shape)
    ts = [-1.0, -0.5, 0.0, 0.5, 1.0]
    grids = [g.with_points(g.points + t * direction) for t in ts]
    model = pca_fit(grids)
    unit = direction.ravel() / np.linalg.norm(direction)
    cos = abs(np.dot(model.components[0], unit))
    assert cos > 0.999
    assert model.explained_variance_ratio()[0] > 0.999
    # variance oracle: sample variance of the projections t * ||D||
    proj = np.array(ts) * np.linalg.norm(direction)
    assert model.variances[0] == pytest.approx(np.var(proj, ddof=1), rel=1e-9)


def test_pca_two_grids_single_nonzero_variance():
    model = pca_fit([warped_grid(2, seed=6), warped_grid(2, seed=7)])
    assert model.variances[0] > 0.0
    assert np.sum(model.variances > 1e-18) == 1


def test_pca_components_orthonormal():
    grids = [warped_grid(2, seed=i) for i in range(6)]
    model = pca_fit(grids)
    gram = model.components @ model.components.T
    assert np.abs(gram - np.eye(len(model.variances))).max() < 1e-8
    assert np.all(np.diff(model.variances) <= 1e-15)


def test_pca_reconstructs_training_grids():
    grids = [warped_grid(2, seed=10 + i) for i in range(5)]
    model = pca_fit(grids)
    for g in grids:
        x = g.points.ravel() - model.mean
        coeffs = model.components @ x
        recon = model.mean + coeffs @ model.components
        assert np.abs(recon - g.points.ravel()).max() < 1e-6


def test_pca_sign_convention():
    grids = [warped_grid(2, seed=20 + i) for i in range(4)]
    model = pca_fit(grids)
    for row in model.components:
        assert row[np.argmax(np.abs(row))] > 0


def test_pca_validation():
    with pytest.raises(ValueError, match="at least 2"):
        pca_fit([regular_grid(2, 0.0, 1.0)])
    with pytest.raises(ValueError, match="mismatch"):
        pca_fit([regular_grid(2, 0.0, 1.0), regular_grid(3, 0.0, 1.0)])


# -- PCA deformation ------------------------------------------------------------------

def _rank1_model_and_grid():
    g = regular_grid(2, 0.0, 1.0)
    rng = np.random.default_rng(8)
    direction = rng.standard_normal(g.points.shape)
    grids = [g.with_points(g.points + t * direction) for t in (-1, -0.5, 0, 0.5, 1)]
    return pca_fit(grids), g, direction


def test_pca_deform_zero_coeffs_identity():
    model, g, _ = _rank1_model_and_grid()
    pts = np.random.default_rng(9).random((60, 3)) * 0.8 + 0.1
    shape = SampledShape(points=pts, source_mesh=None, center=np.zeros(3), scale=1.0)
    out_shape, out_grid = pca_deform(shape, g, model, np.array([0.0]))
    assert np.array_equal(out_grid.points, g.points)
    assert np.abs(out_shape.points - pts).max() < 1e-8


def test_pca_deform_symmetric_coeffs():
    model, g, _ = _rank1_model_and_grid()
    plus = pca_deform_grid(g, model, np.array([2.0]))
    minus = pca_deform_grid(g, model, np.array([-2.0]))
    assert np.abs((plus.points + minus.points) / 2.0 - g.points).max() < 1e-12


def test_pca_deform_rank1_matches_construction():
    model, g, direction = _rank1_model_and_grid()
    out = pca_deform_grid(g, model, np.array([1.0]))
    unit = direction.ravel() / np.linalg.norm(direction)
    sign = np.sign(np.dot(model.components[0], unit))
    expected = g.points.ravel() + np.sqrt(model.variances[0]) * sign * unit
    assert np.abs(out.points.ravel() - expected).max() < 1e-9


def test_pca_deform_linear_in_coeffs():
    model, g, _ = _rank1_model_and_grid()
    one = pca_deform_grid(g, model, np.array([1.0])).points - g.points
    three = pca_deform_grid(g, model, np.array([3.0])).points - g.points
    assert np.abs(three - 3.0 * one).max() < 1e-12


def test_pca_deform_validation():
    model, g, _ = _rank1_model_and_grid()
    with pytest.raises(ValueError, match="coefficients"):
        pca_deform_grid(g, model, np.ones(model.n_components + 1))
    with pytest.raises(ValueError, match="mismatch"):
        pca_deform_grid(regular_grid(3, 0.0, 1.0), model, np.array([1.0]))
