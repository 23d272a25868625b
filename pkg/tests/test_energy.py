import numpy as np
import pytest

from dvg.energy import (
    EnergyError,
    EnergyParams,
    bending_energy,
    elastic_energy,
    energy_gradient,
    inclusion_loss,
    nearest_centers,
    total_energy,
)
from dvg.grid import ball_covering, regular_grid

from conftest import warped_grid


def fd_gradient(grid, samples, params, h=1e-6):
    """Central finite differences of total_energy, the gradient oracle."""
    pts = grid.points
    out = np.zeros_like(pts)
    for n in range(len(pts)):
        for c in range(3):
            plus = pts.copy()
            plus[n, c] += h
            minus = pts.copy()
            minus[n, c] -= h
            ep, _ = total_energy(grid.with_points(plus), samples, params)
            em, _ = total_energy(grid.with_points(minus), samples, params)
            out[n, c] = (ep - em) / (2 * h)
    return out


def bending_reference(grid, beta, gamma):
    """Independent loop implementation of the bending stencils."""
    r = grid.resolution
    lat = grid.lattice()
    h = 1.0 / r
    n = r + 1

    def clamp(i):
        return min(max(i, 1), n - 2)

    total = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                ci, cj, ck = clamp(i), clamp(j), clamp(k)
                uu = (lat[ci + 1, j, k] - 2 * lat[ci, j, k] + lat[ci - 1, j, k]) / h**2
                vv = (lat[i, cj + 1, k] - 2 * lat[i, cj, k] + lat[i, cj - 1, k]) / h**2
                ww = (lat[i, j, ck + 1] - 2 * lat[i, j, ck] + lat[i, j, ck - 1]) / h**2
                uv = (lat[ci + 1, cj + 1, k] - lat[ci + 1, cj - 1, k]
                      - lat[ci - 1, cj + 1, k] + lat[ci - 1, cj - 1, k]) / (4 * h**2)
                vw = (lat[i, cj + 1, ck + 1] - lat[i, cj + 1, ck - 1]
                      - lat[i, cj - 1, ck + 1] + lat[i, cj - 1, ck - 1]) / (4 * h**2)
                uw = (lat[ci + 1, j, ck + 1] - lat[ci + 1, j, ck - 1]
                      - lat[ci - 1, j, ck + 1] + lat[ci - 1, j, ck - 1]) / (4 * h**2)
                total += beta * (uu @ uu + vv @ vv + ww @ ww)
                total += gamma * (uv @ uv + vw @ vw + uw @ uw)
    return total / n**3


def test_elastic_identity_grid():
    assert elastic_energy(regular_grid(4, 0.0, 1.0), EnergyParams()) == pytest.approx(
        3.0, abs=1e-12
    )


def test_elastic_scales_quadratically():
    g = regular_grid(4, 0.0, 1.0)
    half = g.with_points(g.points * 0.5)
    assert elastic_energy(half, EnergyParams()) == pytest.approx(0.75, abs=1e-12)
    w = warped_grid(3, seed=0)
    s = 1.7
    scaled = w.with_points(w.points * s)
    assert elastic_energy(scaled, EnergyParams()) == pytest.approx(
        s**2 * elastic_energy(w, EnergyParams()), rel=1e-12
    )


def test_elastic_collapsed_grid_zero():
    g = regular_grid(3, 0.0, 1.0)
    collapsed = g.with_points(np.full_like(g.points, 0.25))
    assert elastic_energy(collapsed, EnergyParams()) == 0.0


def test_bending_zero_on_affine():
    g = regular_grid(4, 0.0, 1.0)
    assert bending_energy(g, EnergyParams()) == pytest.approx(0.0, abs=1e-12)
    m = np.array([[2.0, 0.3, 0.0], [0.1, 0.5, 0.2], [0.0, 0.0, 1.5]])
    affine = g.with_points(g.points @ m.T + [1.0, -2.0, 3.0])
    assert bending_energy(affine, EnergyParams()) == pytest.approx(0.0, abs=1e-12)


def test_bending_quadratic_matches_reference():
    g = regular_grid(4, 0.0, 1.0)
    pts = g.points.copy()
    pts[:, 0] = pts[:, 0] ** 2
    grid = g.with_points(pts)
    params = EnergyParams(beta=1.0, gamma=0.0)
    expected = bending_reference(grid, beta=1.0, gamma=0.0)
    got = bending_energy(grid, params)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(4.0, rel=1e-12)  # |V_uu|^2 = 4 at every node


def test_bending_random_matches_reference():
    grid = warped_grid(3, scale=0.1, seed=11)
    params = EnergyParams(beta=0.7, gamma=1.3)
    assert bending_energy(grid, params) == pytest.approx(
        bending_reference(grid, 0.7, 1.3), rel=1e-12
    )


def test_bending_requires_r2():
    with pytest.raises(ValueError, match="resolution >= 2"):
        bending_energy(regular_grid(1, 0.0, 1.0), EnergyParams())


def test_inclusion_at_threshold_exactly_half():
    g = regular_grid(1, 0.0, 1.0)
    params = EnergyParams(ball_radius=0.25, stiffness=40.0, covering_s=1)
    sample = np.array([[0.5 + 0.25, 0.5, 0.5]])  # exactly radius from the center
    assert inclusion_loss(sample, g, params) == 0.5


def test_inclusion_sigmoid_tail_at_center():
    g = regular_grid(1, 0.0, 1.0)
    params = EnergyParams(ball_radius=0.1, stiffness=100.0, covering_s=1)  # a*r = 10
    sample = np.array([[0.5, 0.5, 0.5]])
    expected = 0.5 * np.tanh(-10.0) + 0.5
    assert inclusion_loss(sample, g, params) == pytest.approx(expected, rel=1e-12)
    assert inclusion_loss(sample, g, params) < 1e-8


def test_inclusion_far_samples_approach_one():
    g = regular_grid(1, 0.0, 1.0)
    params = EnergyParams(ball_radius=0.1, stiffness=100.0)
    far = np.array([[50.0, 50.0, 50.0], [-30.0, 0.0, 0.0]])
    assert inclusion_loss(far, g, params) > 1.0 - 1e-12


def test_inclusion_monotone_in_radius():
    g = warped_grid(2, seed=12)
    samples = np.random.default_rng(5).random((64, 3))
    prev = None
    for radius in (0.02, 0.05, 0.1, 0.2, 0.5):
        params = EnergyParams(ball_radius=radius, stiffness=50.0)
        val = inclusion_loss(samples, g, params)
        if prev is not None:
            assert val <= prev
        prev = val


def test_inclusion_empty_samples_zero():
    assert inclusion_loss(np.empty((0, 3)), regular_grid(1, 0.0, 1.0), EnergyParams()) == 0.0


def test_nearest_centers_tie_breaks_low_index():
    centers = np.array([[0.0, 0, 0], [2.0, 0, 0], [1.0, 1, 0]])
    sample = np.array([[1.0, 0.0, 0.0]])  # equidistant from centers 0 and 1
    idx, dist = nearest_centers(sample, centers)
    assert idx[0] == 0
    assert dist[0] == 1.0


def test_nearest_centers_kdtree_path_matches_bruteforce():
    rng = np.random.default_rng(13)
    samples = rng.random((3000, 3))
    centers = rng.random((1000, 3))
    idx, dist = nearest_centers(samples, centers)  # 3e6 pairs: tree path
    brute = np.argmin(
        np.linalg.norm(samples[:, None, :] - centers[None, :, :], axis=2), axis=1
    )
    assert np.array_equal(idx, brute)


def test_total_energy_identity_no_inclusion():
    params = EnergyParams(lambda_i=0.0)
    total, breakdown = total_energy(
        regular_grid(4, 0.0, 1.0), np.empty((0, 3)), params
    )
    assert total == pytest.approx(3.0, abs=1e-12)
    assert breakdown["bending"] == pytest.approx(0.0, abs=1e-12)


def test_total_energy_collapsed_inclusion_saturates():
    g = regular_grid(2, 0.0, 1.0)
    collapsed = g.with_points(np.full_like(g.points, 0.5))
    params = EnergyParams(lambda_e=0.0, lambda_b=0.0, ball_radius=0.01, stiffness=1000.0)
    samples = np.random.default_rng(1).random((32, 3)) * 0.2 + 0.75
    total, _ = total_energy(collapsed, samples, params)
    assert total == pytest.approx(params.lambda_i, rel=1e-6)


def test_total_energy_is_sum_of_terms():
    grid = warped_grid(4, seed=14)
    samples = np.random.default_rng(2).random((512, 3))
    params = EnergyParams()
    total, breakdown = total_energy(grid, samples, params)
    direct = (
        params.lambda_e * elastic_energy(grid, params)
        + params.lambda_b * bending_energy(grid, params)
        + params.lambda_i * inclusion_loss(samples, grid, params)
    )
    assert total == pytest.approx(direct, abs=1e-12)
    assert total == pytest.approx(sum(breakdown.values()), abs=1e-12)
    assert total >= 0.0


def test_translation_invariance():
    grid = warped_grid(3, seed=15)
    samples = np.random.default_rng(3).random((128, 3))
    params = EnergyParams()
    t = np.array([2.5, -1.0, 0.75])
    shifted = grid.with_points(grid.points + t)
    e0, _ = total_energy(grid, samples, params)
    e1, _ = total_energy(shifted, samples + t, params)
    assert e1 == pytest.approx(e0, abs=1e-12)


def test_gradient_matches_fd_small():
    grid = warped_grid(3, seed=16)
    samples = np.random.default_rng(4).random((64, 3)) * 0.8 + 0.1
    params = EnergyParams()
    analytic = energy_gradient(grid, samples, params)
    fd = fd_gradient(grid, samples, params)
    rel = np.abs(analytic - fd) / (1.0 + np.abs(fd))
    assert rel.max() < 1e-4


def test_gradient_zero_deep_interior_identity_grid():
    # with one-sided boundary stencils the elastic term is only critical at
    # nodes whose full stencil neighborhood is interior
    g = regular_grid(6, 0.0, 1.0)
    grad = energy_gradient(g, np.empty((0, 3)), EnergyParams(lambda_i=0.0))
    lat = grad.reshape(7, 7, 7, 3)
    assert np.abs(lat[2:-2, 2:-2, 2:-2]).max() < 1e-13


def test_gradient_zero_on_collapsed_grid():
    g = regular_grid(3, 0.0, 1.0)
    collapsed = g.with_points(np.full_like(g.points, 0.4))
    grad = energy_gradient(collapsed, np.empty((0, 3)), EnergyParams(lambda_i=0.0))
    assert np.abs(grad).max() == 0.0


def test_gradient_r1_skips_bending():
    g = regular_grid(1, 0.0, 1.0)
    samples = np.random.default_rng(6).random((16, 3))
    grad = energy_gradient(g, samples, EnergyParams())
    assert np.all(np.isfinite(grad))
    fd = fd_gradient(g, samples, EnergyParams())
    rel = np.abs(grad - fd) / (1.0 + np.abs(fd))
    assert rel.max() < 1e-4


def test_params_validation():
    with pytest.raises(ValueError):
        EnergyParams(lambda_e=-1.0)
    with pytest.raises(ValueError):
        EnergyParams(ball_radius=0.0)
    with pytest.raises(ValueError):
        EnergyParams(covering_s=0)


def test_auto_radius_covers_initial_grid():
    # half-diagonal of a covering subcell: every point of the regular grid
    # volume is within the radius of some center
    params = EnergyParams()
    for r in (1, 2, 4):
        radius = params.radius_for(r)
        assert radius == pytest.approx(np.sqrt(3.0) / 2.0 / (r * params.covering_s))
        g = regular_grid(r, 0.0, 1.0)
        centers = ball_covering(g, params.covering_s)
        probe = np.random.default_rng(0).random((256, 3))
        _, dist = nearest_centers(probe, centers)
        assert dist.max() <= radius + 1e-12
