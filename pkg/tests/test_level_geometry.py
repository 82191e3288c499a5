import numpy as np
import pytest
from scipy import ndimage

from depthtrim.depth import GridSpec, ProjectionDepth, SmoothedDepth, SpatialDepth, TukeyDepth, depth_field
from depthtrim.level_geometry import (
    ChartError,
    check_H2,
    contour_marching_squares,
    deepest_point,
    jacobian_det_tau,
    radial_chart,
    radial_radius,
    sphere_directions,
)
from depthtrim.populations import beta22_sample


def radial(p):
    return 1.0 / (1.0 + np.linalg.norm(p, axis=1))


def two_bumps(p):
    b1 = np.exp(-np.sum((p - [-1.5, 0.0]) ** 2, axis=1))
    b2 = np.exp(-np.sum((p - [1.5, 0.0]) ** 2, axis=1))
    return np.maximum(b1, b2)


def hausdorff(A, B):
    d = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


class TestDeepestPoint:
    def test_radial_origin(self):
        grid_step = 4.0 / 63
        mu = deepest_point(radial, ([-2, -2], [2, 2]))
        assert np.linalg.norm(mu) <= grid_step

    def test_symmetric_spatial_centroid(self):
        X = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]]) + [0.3, -0.1]
        est = SpatialDepth().fit(X)
        mu = deepest_point(est, ([-1, -1], [3, 3]), resolution=41)
        fine = GridSpec((0.8, 0.4), (1.8, 1.4), (201, 201))
        scan = fine.nodes()[np.argmax(depth_field(est, fine).ravel())]
        assert np.linalg.norm(mu - X.mean(0)) < 0.01
        assert np.linalg.norm(scan - X.mean(0)) < 0.01

    def test_flat_field(self):
        with pytest.raises(ValueError, match="no interior mode"):
            deepest_point(lambda p: np.ones(len(p)), ([0, 0], [1, 1]))


class TestRadialRadius:
    @pytest.mark.parametrize("a, expected", [(0.5, 1.0), (0.25, 3.0)])
    def test_analytic(self, a, expected):
        for t in np.linspace(0, 2 * np.pi, 7):
            r = radial_radius(radial, [0, 0], [np.cos(t), np.sin(t)], a, tol=1e-10)
            assert r == pytest.approx(expected, abs=1e-8)

    def test_center_below_level(self):
        with pytest.raises(ValueError, match="center below level"):
            radial_radius(radial, [5.0, 0.0], [1, 0], 0.5)

    def test_level_not_reached(self):
        with pytest.raises(ValueError, match="level not reached"):
            radial_radius(radial, [0.0, 0.0], [1, 0], 0.05, r_max=5.0)

    def test_first_crossing(self):
        # non-monotone profile: the first crossing wins
        prof = lambda p: np.where(np.linalg.norm(p, axis=1) < 2, radial(p), 0.9)
        assert radial_radius(prof, [0, 0], [1, 0], 0.5) == pytest.approx(1.0, abs=1e-7)

    def test_smoothed_tukey_isotropy(self):
        X = np.random.default_rng(2).standard_normal((2000, 2))
        est = SmoothedDepth(TukeyDepth(), 10_000, random_state=1).fit(X)
        chart = radial_chart(est, X.mean(0), 0.2, 64, r_max=5.0, tol=1e-6)
        spread = (chart.radii.max() - chart.radii.min()) / chart.radii.mean()
        assert spread < 0.10


class TestRadialChart:
    def test_equal_radii(self):
        chart = radial_chart(radial, [0, 0], 0.5, 32)
        np.testing.assert_allclose(chart.radii, 1.0, atol=1e-7)

    def test_single_ray(self):
        chart = radial_chart(radial, [0, 0], 0.5, 1)
        assert chart.radii.shape == (1,)

    def test_root_certificate(self):
        chart = radial_chart(lambda p: two_bumps(p + [1.5, 0]), [0, 0], 0.3, 48, tol=1e-10)
        vals = two_bumps(chart.points() + [1.5, 0])
        assert np.all(np.abs(vals - 0.3) <= 1e-9) and np.all(chart.radii > 0)

    def test_area_against_grid_count(self):
        ell = lambda p: 1.0 / (1.0 + np.sqrt((p[:, 0] / 2) ** 2 + p[:, 1] ** 2))
        chart = radial_chart(ell, [0, 0], 0.5, 256)
        grid = GridSpec((-3, -2), (3, 2), (601, 401))
        cell = np.prod(grid.step())
        count = np.sum(depth_field(ell, grid) >= 0.5) * cell
        assert chart.area() == pytest.approx(count, rel=0.02)

    def test_partial_chart(self):
        half = lambda p: np.where(p[:, 0] < 0, 1.0, radial(p))
        with pytest.raises(ChartError, match="partial chart") as info:
            radial_chart(half, [0, 0], 0.5, 8, r_max=3.0)
        assert len(info.value.failed) > 0

    def test_sphere_directions(self):
        d = sphere_directions(50, 3)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)
        np.testing.assert_allclose(d.mean(axis=0), 0.0, atol=0.1)


class TestCheckH2:
    def test_radial_passes(self):
        chart = radial_chart(radial, [0, 0], 0.5, 32)
        assert check_H2(radial, chart, 0.2).pass_fraction == 1.0

    def test_ring_plateau_is_flagged(self):
        def ring(p):
            r = np.linalg.norm(p, axis=1)
            plateau = (r > 0.9) & (r < 1.1) & (p[:, 1] > 0)
            return np.where(plateau, 0.5, radial(p))

        chart = radial_chart(radial, [0, 0], 0.5, 32)
        report = check_H2(ring, chart, 0.05)
        assert report.pass_fraction < 1.0 and len(report.flagged) > 0

    def test_smoothed_projection_beta(self):
        X = beta22_sample(500, seed=1)
        est = SmoothedDepth(ProjectionDepth(), 4000, random_state=1).fit(X)
        mu = deepest_point(est, ([0, 0], [1, 1]), resolution=32)
        chart = radial_chart(est, mu, 0.2, 64, r_max=2.0)
        assert check_H2(est, chart, 0.02).pass_fraction >= 0.95


class TestContours:
    def test_circle(self):
        grid = GridSpec((-5, -5), (5, 5), (201, 201))
        cs = contour_marching_squares(depth_field(radial, grid), 0.5, grid)
        assert len(cs) == 1 and cs.closed == [True]
        t = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
        circle = np.column_stack([np.cos(t), np.sin(t)])
        assert hausdorff(np.asarray(cs.components[0]), circle) <= 2 * grid.step()[0]

    def test_level_above_max(self):
        grid = GridSpec((-1, -1), (1, 1), (21, 21))
        assert len(contour_marching_squares(depth_field(radial, grid), 1.5, grid)) == 0

    def test_two_bumps(self):
        grid = GridSpec((-4, -3), (4, 3), (161, 121))
        field = depth_field(two_bumps, grid)
        a = 0.5  # saddle value at the origin is exp(-2.25)
        cs = contour_marching_squares(field, a, grid)
        _, flood = ndimage.label(field >= a)
        assert len(cs) == 2 == flood
        assert all(cs.closed)

    def test_truncated_component(self):
        grid = GridSpec((0, -2), (2, 2), (41, 81))
        cs = contour_marching_squares(depth_field(radial, grid), 0.5, grid)
        assert cs.truncated == [0]

    def test_chart_contour_agreement(self):
        grid = GridSpec((-2, -2), (2, 2), (161, 161))
        cs = contour_marching_squares(depth_field(radial, grid), 0.4, grid)
        chart = radial_chart(radial, [0, 0], 0.4, 400)
        assert hausdorff(np.asarray(cs.components[0]), chart.points()) <= 2 * grid.step()[0]

    def test_csv(self, tmp_path):
        grid = GridSpec((-2, -2), (2, 2), (41, 41))
        cs = contour_marching_squares(depth_field(radial, grid), 0.5, grid)
        cs.to_csv(tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "component_id,vertex_index,x,y"
        assert len(lines) - 1 == sum(len(c) for c in cs.components)


class TestJacobian:
    @pytest.mark.parametrize("s, expected", [(0.5, 4.0), (0.25, 48.0)])
    def test_analytic(self, s, expected):
        for theta in (0.0, 1.1, 4.0):
            got = jacobian_det_tau(radial, [0, 0], s, theta, h=1e-4)
            assert abs(got - expected) / expected <= 1e-4

    def test_positive(self):
        f = lambda p: 1.0 / (1.0 + np.sqrt((p[:, 0] / 2) ** 2 + p[:, 1] ** 2))
        for theta in np.linspace(0, 2 * np.pi, 9):
            assert jacobian_det_tau(f, [0, 0], 0.4, theta) > 0
