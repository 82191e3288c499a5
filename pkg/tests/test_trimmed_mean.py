import warnings
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import integrate

from depthtrim.density import fit_kde, kde_eval
from depthtrim.depth import SmoothedDepth, SpatialDepth, TukeyDepth
from depthtrim.populations import beta22_pdf, beta22_sample
from depthtrim.trimmed_mean import (
    BUNDLED_REFERENCES,
    TRUNCATION_WARNING,
    DepthTrimmedMean,
    population_reference,
    reference_record,
    trimmed_mean_grid,
    trimmed_mean_mc,
)

UNIT_BOX = (np.zeros(2), np.ones(2))


def disk_stub(radius):
    """Radial depth about (0.5, 0.5) with {D >= 0.5} the disk of the given radius."""
    return lambda p: 1.0 / (1.0 + np.linalg.norm(p - 0.5, axis=1) / radius)


def polar_disk_moments(radius):
    """Mass and first moment of the Beta(2,2) product density over the disk, in polar coordinates."""
    def dens(r, t):
        x, y = 0.5 + r * np.cos(t), 0.5 + r * np.sin(t)
        return beta22_pdf(np.array([[x, y]]))[0] * r

    mass = integrate.dblquad(dens, 0, 2 * np.pi, 0, radius, epsabs=1e-12)[0]
    mx = integrate.dblquad(lambda r, t: dens(r, t) * (0.5 + r * np.cos(t)), 0, 2 * np.pi, 0, radius,
                           epsabs=1e-12)[0]
    return mass, mx


@pytest.fixture(scope="module")
def beta_kde():
    return fit_kde(beta22_sample(300, seed=11))


@pytest.fixture(scope="module")
def smoothed_spatial(beta_kde):
    return SmoothedDepth(SpatialDepth(), 2000, random_state=5).fit_kde_model(beta_kde)


class TestMonteCarlo:
    def test_tiny_level_recovers_kde_mean(self, beta_kde, smoothed_spatial):
        res = trimmed_mean_mc(beta_kde, smoothed_spatial, 1e-9, m=20_000, seed=1)
        assert res.trimmed_mass == 1.0
        assert np.all(np.abs(res.vector - beta_kde.mean()) <= 3 * res.standard_error)

    def test_level_above_one_is_empty(self, beta_kde, smoothed_spatial):
        res = trimmed_mean_mc(beta_kde, smoothed_spatial, 2.0, m=1000)
        assert res.trimmed_mass == 0.0 and np.all(res.vector == 0) and res.normalized_vector is None

    def test_symmetric_population_centre(self, smoothed_spatial):
        kde = fit_kde(beta22_sample(2000, seed=4))
        depth = SmoothedDepth(SpatialDepth(), 2000, random_state=1).fit_kde_model(kde)
        mc = trimmed_mean_mc(kde, depth, 0.3, m=20_000, seed=2)
        grid = trimmed_mean_grid(kde, depth, 0.3, (np.full(2, -0.6), np.full(2, 1.6)), 128)
        np.testing.assert_allclose(mc.normalized_vector, 0.5, atol=0.02)
        np.testing.assert_allclose(grid.normalized_vector, 0.5, atol=0.02)

    def test_monotone_mass(self, beta_kde, smoothed_spatial):
        masses = [trimmed_mean_mc(beta_kde, smoothed_spatial, a, m=4000, seed=3).trimmed_mass
                  for a in np.linspace(0.05, 0.95, 10)]
        assert all(m1 >= m2 for m1, m2 in zip(masses, masses[1:]))

    def test_strict_flag(self):
        kde = fit_kde(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))
        stub = lambda p: np.full(len(p), 0.5)
        assert trimmed_mean_mc(kde, stub, 0.5, m=100).trimmed_mass == 1.0
        assert trimmed_mean_mc(kde, stub, 0.5, m=100, strict=True).trimmed_mass == 0.0

    def test_deterministic(self, beta_kde, smoothed_spatial):
        a = trimmed_mean_mc(beta_kde, smoothed_spatial, 0.4, m=3000, seed=9)
        b = trimmed_mean_mc(beta_kde, smoothed_spatial, 0.4, m=3000, seed=9)
        np.testing.assert_array_equal(a.vector, b.vector)


class TestGrid:
    def test_disk_against_polar_oracle(self):
        res = trimmed_mean_grid(beta22_pdf, disk_stub(0.2), 0.5, UNIT_BOX, 400)
        mass, mx = polar_disk_moments(0.2)
        assert res.trimmed_mass == pytest.approx(mass, abs=1e-3)
        np.testing.assert_allclose(res.vector, res.trimmed_mass * 0.5, atol=1e-12)
        assert res.vector[0] == pytest.approx(mx, abs=1e-3)

    def test_level_above_one(self):
        res = trimmed_mean_grid(beta22_pdf, disk_stub(0.2), 2.0, UNIT_BOX, 32)
        assert res.trimmed_mass == 0.0 and np.all(res.vector == 0)

    def test_resolution_doubling(self):
        r1 = trimmed_mean_grid(beta22_pdf, disk_stub(0.3), 0.5, UNIT_BOX, 200)
        r2 = trimmed_mean_grid(beta22_pdf, disk_stub(0.3), 0.5, UNIT_BOX, 400)
        assert np.max(np.abs(r1.vector - r2.vector)) < 1e-3
        assert abs(r1.trimmed_mass - r2.trimmed_mass) < 1e-3

    def test_refinement_agrees_with_full_grid(self):
        full = trimmed_mean_grid(beta22_pdf, disk_stub(0.3), 0.5, UNIT_BOX, 256)
        refined = trimmed_mean_grid(beta22_pdf, disk_stub(0.3), 0.5, UNIT_BOX, 256, refine=True)
        np.testing.assert_array_equal(full.vector, refined.vector)

    def test_truncation_warning(self):
        with pytest.warns(UserWarning, match=TRUNCATION_WARNING):
            trimmed_mean_grid(beta22_pdf, disk_stub(0.8), 0.5, UNIT_BOX, 32)

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            trimmed_mean_grid(beta22_pdf, disk_stub(0.2), 0.5, UNIT_BOX, 8)

    def test_tiny_level_recovers_mean(self, beta_kde, smoothed_spatial):
        h = beta_kde.bandwidths
        box = (beta_kde.data.min(0) - 8 * h, beta_kde.data.max(0) + 8 * h)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = trimmed_mean_grid(beta_kde, smoothed_spatial, 1e-9, box, 200)
        assert res.trimmed_mass == pytest.approx(1.0, abs=1e-3)
        np.testing.assert_allclose(res.vector, beta_kde.mean(), atol=1e-3)

    def test_mc_and_grid_agree(self, beta_kde, smoothed_spatial):
        h = beta_kde.bandwidths
        box = (beta_kde.data.min(0) - 8 * h, beta_kde.data.max(0) + 8 * h)
        grid = trimmed_mean_grid(beta_kde, smoothed_spatial, 0.4, box, 200)
        mc = trimmed_mean_mc(beta_kde, smoothed_spatial, 0.4, m=20_000, seed=7)
        assert np.all(np.abs(mc.vector - grid.vector) <= 3 * mc.standard_error + 1e-3)


class TestPopulationReference:
    def test_bundled_symmetric_reference(self):
        cfg = SimpleNamespace(population="beta22_product", depth="tukey", a=0.1)
        rec = reference_record(cfg)
        assert rec["n_ref"] == 200_000 and rec["resolution"] == 400
        np.testing.assert_allclose(np.array(rec["vector"]) / rec["mass"], 0.5, atol=5e-3)

    def test_bundle_covers_panel_configs(self):
        assert len(list(BUNDLED_REFERENCES.glob("reference-*.json"))) >= 6

    def test_empty_region(self):
        cfg = SimpleNamespace(population="beta22_product", depth="spatial", a=1.5)
        np.testing.assert_array_equal(population_reference(cfg, n_ref=1000), [0.0, 0.0])

    def test_reflection_and_seed_agreement(self):
        cfg = SimpleNamespace(population="beta22_product", depth="projection", a=0.3)
        base = reference_record(cfg)
        reflected = reference_record(cfg, reflect=True)
        other = reference_record(cfg, seed=99)
        nb = np.array(base["vector"]) / base["mass"]
        nr = 1.0 - np.array(reflected["vector"]) / reflected["mass"]
        no = np.array(other["vector"]) / other["mass"]
        np.testing.assert_allclose(nb, 0.5, atol=5e-3)
        np.testing.assert_allclose(nr, nb, atol=5e-3)
        np.testing.assert_allclose(no, nb, atol=5e-3)
        assert abs(base["mass"] - other["mass"]) < 5e-3

    def test_cache_roundtrip(self, tmp_path):
        cfg = SimpleNamespace(population="beta22_product", depth="spatial", a=0.5)
        first = reference_record(cfg, n_ref=2000, resolution=64, cache_dir=tmp_path)
        files = list(tmp_path.glob("reference-*.json"))
        assert len(files) == 1
        assert set(first) == {"config_hash", "vector", "mass", "n_ref", "resolution", "seed"}
        assert reference_record(cfg, n_ref=2000, resolution=64, cache_dir=tmp_path) == first

    @pytest.mark.slow
    def test_two_reference_seeds_agree_tukey(self):
        cfg = SimpleNamespace(population="beta22_product", depth="tukey", a=0.1)
        a, b = reference_record(cfg), reference_record(cfg, seed=7)
        np.testing.assert_allclose(a["vector"], b["vector"], atol=5e-3)


class TestEstimator:
    def test_fit_predict(self):
        X = beta22_sample(200, seed=1)
        est = DepthTrimmedMean(depth="spatial", a=0.5, mc_size=4000, surrogate_size=1000).fit(X)
        assert est.location_.shape == (2,) and 0 < est.trimmed_mass_ < 1
        labels = est.predict(np.array([[0.5, 0.5], [3.0, 3.0]]))
        assert labels.tolist() == [1, -1]
        assert set(est.get_params()) >= {"depth", "a", "method", "mc_size", "random_state"}

    def test_translation_equivariance(self):
        X = beta22_sample(150, seed=2)
        b = np.array([3.0, -2.0])
        params = dict(depth=TukeyDepth(), a=0.2, mc_size=4000, surrogate_size=1000, random_state=4)
        e0 = DepthTrimmedMean(**params).fit(X)
        e1 = DepthTrimmedMean(**params).fit(X + b)
        assert np.all(np.abs(e1.normalized_location_ - e0.normalized_location_ - b)
                      <= 3 * e0.standard_error_ / e0.trimmed_mass_ + 1e-9)

    def test_grid_method(self):
        X = beta22_sample(100, seed=3)
        est = DepthTrimmedMean(depth="spatial", a=0.3, method="grid", resolution=64,
                               surrogate_size=500).fit(X)
        assert est.result_.method == "grid" and est.standard_error_ is None

    def test_raw_depth_option(self):
        X = beta22_sample(100, seed=3)
        est = DepthTrimmedMean(depth="spatial", a=0.3, smoothed=False, mc_size=2000).fit(X)
        assert isinstance(est.depth_, SpatialDepth)

    def test_result_dict(self):
        X = beta22_sample(100, seed=3)
        d = DepthTrimmedMean(depth="spatial", a=0.3, mc_size=500, surrogate_size=200).fit(X).result_.to_dict()
        assert set(d) == {"vector", "mass", "normalized_vector", "stderr", "a", "method"}
