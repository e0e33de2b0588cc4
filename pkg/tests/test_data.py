"""Domain, generators, normalization, CSV/IDX I/O, and rotation tests."""

import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

import helpers
from ddde.data import (
    AffineRecord,
    Dataset,
    Domain,
    MIXTURE_CENTERS,
    circles_raw,
    gen_circles,
    gen_correlated_gaussian,
    gen_gaussian,
    gen_gaussian_mixture,
    gen_two_moons,
    load_csv,
    load_idx,
    normalize_to_unit,
    rotate_image,
    sample_uniform,
    save_csv,
    two_moons_raw,
)
from ddde.errors import (
    DegenerateDataError,
    DomainError,
    FormatError,
    ShapeError,
    ValidationError,
)


class TestDomain:
    def test_unit_box_log_u_is_zero(self):
        assert Domain.unit(2).log_u == 0.0
        assert Domain.unit(784).log_u == 0.0

    def test_log_u_is_negative_log_volume(self):
        dom = Domain((0.0, 0.0), (2.0, 2.0))
        assert dom.log_u == pytest.approx(-math.log(4.0), rel=1e-15)

    def test_invalid_bounds(self):
        with pytest.raises(ValidationError):
            Domain((0.0,), (0.0,))
        with pytest.raises(ValidationError):
            Domain((0.0, 1.0), (1.0, 0.5))
        with pytest.raises(ValidationError):
            Domain((), ())

    def test_contains_is_closed(self):
        dom = Domain.unit(2)
        inside = dom.contains(np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 1.0001]]))
        np.testing.assert_array_equal(inside, [True, True, False])

    def test_require_inside_names_row(self):
        dom = Domain.unit(2)
        with pytest.raises(DomainError) as err:
            dom.require_inside(np.array([[0.5, 0.5], [0.5, 0.5], [2.0, 0.5]]))
        assert "row 2" in str(err.value)


class TestSampleUniform:
    def test_moments(self):
        ds = sample_uniform(Domain.unit(2), 100_000, np.random.default_rng(0))
        means = ds.points.mean(axis=0)
        assert np.all(np.abs(means - 0.5) < 0.005)
        # uniform variance (hi - lo)^2 / 12
        assert np.all(np.abs(ds.points.var(axis=0) - 1.0 / 12.0) < 0.002)

    def test_all_points_inside(self):
        dom = Domain((-1.0, 2.0), (1.0, 5.0))
        ds = sample_uniform(dom, 1000, np.random.default_rng(1))
        assert dom.contains(ds.points).all()

    def test_seeded_determinism(self):
        a = sample_uniform(Domain.unit(3), 100, np.random.default_rng(7))
        b = sample_uniform(Domain.unit(3), 100, np.random.default_rng(7))
        np.testing.assert_array_equal(a.points, b.points)

    def test_n_must_be_positive(self):
        with pytest.raises(ValidationError):
            sample_uniform(Domain.unit(2), 0, np.random.default_rng(0))


class TestGenGaussian:
    def test_empirical_std(self):
        ds = gen_gaussian(100_000, (0.5, 0.5), 0.1, np.random.default_rng(0))
        stds = ds.points.std(axis=0)
        assert np.all(np.abs(stds - 0.1) < 0.002)
        assert np.all(np.abs(ds.points.mean(axis=0) - 0.5) < 0.002)

    def test_small_sigma_concentrates(self):
        ds = gen_gaussian(500, (0.5, 0.5), 1e-4, np.random.default_rng(1))
        assert np.all(np.abs(ds.points - 0.5) < 0.01)

    def test_seeded_determinism(self):
        a = gen_gaussian(64, (0.5, 0.5), 0.1, np.random.default_rng(3))
        b = gen_gaussian(64, (0.5, 0.5), 0.1, np.random.default_rng(3))
        np.testing.assert_array_equal(a.points, b.points)

    def test_points_inside_domain(self):
        ds = gen_gaussian(4096, (0.5, 0.5), 0.2, np.random.default_rng(2))
        assert Domain.unit(2).contains(ds.points).all()

    def test_mostly_outside_mass_rejected(self):
        with pytest.raises(ValidationError):
            gen_gaussian(256, (0.5, 0.5), 5.0, np.random.default_rng(0))


class TestGenCorrelatedGaussian:
    def test_pearson_correlation(self):
        ds = gen_correlated_gaussian(100_000, 0.9, np.random.default_rng(0))
        corr = np.corrcoef(ds.points[:, 0], ds.points[:, 1])[0, 1]
        assert abs(corr - 0.9) < 0.01

    def test_rho_zero_is_isotropic(self):
        ds = gen_correlated_gaussian(100_000, 0.0, np.random.default_rng(1))
        corr = np.corrcoef(ds.points[:, 0], ds.points[:, 1])[0, 1]
        assert abs(corr) < 0.01

    def test_seeded_determinism(self):
        a = gen_correlated_gaussian(128, 0.9, np.random.default_rng(5))
        b = gen_correlated_gaussian(128, 0.9, np.random.default_rng(5))
        np.testing.assert_array_equal(a.points, b.points)

    def test_rho_out_of_range(self):
        with pytest.raises(ValidationError):
            gen_correlated_gaussian(10, 1.0, np.random.default_rng(0))


class TestGenGaussianMixture:
    def test_component_fractions(self):
        ds = gen_gaussian_mixture(90_000, np.random.default_rng(0))
        nearest = np.argmin(
            ((ds.points[:, None, :] - MIXTURE_CENTERS[None, :, :]) ** 2).sum(-1),
            axis=1)
        fractions = np.bincount(nearest, minlength=9) / ds.n
        assert np.all(np.abs(fractions - 1.0 / 9.0) < 0.02)

    def test_centers_are_the_grid(self):
        expected = {(x, y) for x in (0.2, 0.5, 0.8) for y in (0.2, 0.5, 0.8)}
        assert {tuple(c) for c in MIXTURE_CENTERS} == expected

    def test_labels_track_components(self):
        ds = gen_gaussian_mixture(2000, np.random.default_rng(1))
        nearest = np.argmin(
            ((ds.points[:, None, :] - MIXTURE_CENTERS[None, :, :]) ** 2).sum(-1),
            axis=1)
        # sigma = 0.05 vs center spacing 0.3 puts the decision boundary at
        # 3 sigma, so ~0.4% of draws cross to a neighboring bucket
        assert np.mean(nearest == ds.labels) > 0.99

    def test_seeded_determinism(self):
        a = gen_gaussian_mixture(128, np.random.default_rng(9))
        b = gen_gaussian_mixture(128, np.random.default_rng(9))
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.labels, b.labels)


class TestMoonsAndCircles:
    def test_noiseless_moons_lie_on_half_circles(self):
        points, labels = two_moons_raw(200, 0.0, np.random.default_rng(0))
        upper = points[labels == 0]
        lower = points[labels == 1]
        np.testing.assert_allclose(np.hypot(upper[:, 0], upper[:, 1]), 1.0, atol=1e-12)
        assert np.all(upper[:, 1] >= -1e-12)
        radii = np.hypot(lower[:, 0] - 1.0, lower[:, 1] - 0.5)
        np.testing.assert_allclose(radii, 1.0, atol=1e-12)
        assert np.all(lower[:, 1] <= 0.5 + 1e-12)

    def test_noiseless_circle_radii(self):
        points, labels = circles_raw(200, 0.0, 0.5, np.random.default_rng(0))
        radii = np.hypot(points[:, 0], points[:, 1])
        np.testing.assert_allclose(radii[labels == 0], 1.0, atol=1e-12)
        np.testing.assert_allclose(radii[labels == 1], 0.5, atol=1e-12)

    def test_normalized_moons_inside_unit_box(self):
        ds = gen_two_moons(4096, 0.05, np.random.default_rng(2))
        assert Domain.unit(2).contains(ds.points).all()
        assert ds.points.min() >= 0.05 - 1e-12
        assert ds.points.max() <= 0.95 + 1e-12
        assert ds.labels.sum() == 2048

    def test_normalized_circles_inside_unit_box(self):
        ds = gen_circles(1000, 0.05, 0.5, np.random.default_rng(3))
        assert Domain.unit(2).contains(ds.points).all()

    def test_factor_validation(self):
        with pytest.raises(ValidationError):
            circles_raw(10, 0.0, 0.0, np.random.default_rng(0))
        with pytest.raises(ValidationError):
            two_moons_raw(10, -0.1, np.random.default_rng(0))


class TestNormalizeToUnit:
    def test_already_normalized_data_keeps_scale_one(self):
        pts = np.array([[0.05, 0.05], [0.95, 0.95], [0.5, 0.3]])
        _, record = normalize_to_unit(Dataset(pts), margin=0.05)
        np.testing.assert_allclose(record.scale, [1.0, 1.0], rtol=1e-15)
        np.testing.assert_allclose(record.offset, [0.0, 0.0], atol=1e-15)

    def test_zero_margin_example(self):
        pts = np.array([[0.0], [10.0]])
        ds, record = normalize_to_unit(Dataset(pts), margin=0.0)
        np.testing.assert_allclose(record.scale, [0.1], rtol=1e-15)
        np.testing.assert_allclose(record.offset, [0.0], atol=1e-15)
        np.testing.assert_allclose(ds.points.ravel(), [0.0, 1.0], atol=1e-15)

    def test_density_correction_change_of_variables(self):
        # uniform density on raw [0, 10] is 0.1; after mapping onto [0, 1]
        # the unit-box density is 1.0 and the correction recovers log 0.1
        pts = np.array([[0.0], [10.0]])
        _, record = normalize_to_unit(Dataset(pts), margin=0.0)
        log_density_unit = 0.0
        log_density_raw = log_density_unit + record.log_density_correction
        assert log_density_raw == pytest.approx(math.log(0.1), rel=1e-12)

    @settings(max_examples=50)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.4))
    def test_record_round_trips(self, seed, margin):
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((20, 3)) * rng.uniform(0.5, 50.0) + rng.uniform(-5, 5)
        _, record = normalize_to_unit(Dataset(pts), margin=margin)
        np.testing.assert_allclose(record.invert(record.apply(pts)), pts,
                                   rtol=1e-12, atol=1e-12)

    def test_zero_range_dimension_rejected(self):
        pts = np.array([[1.0, 2.0], [1.0, 3.0]])
        with pytest.raises(DegenerateDataError):
            normalize_to_unit(Dataset(pts))

    def test_labels_survive(self):
        ds = Dataset(np.array([[0.0, 1.0], [2.0, 3.0]]), labels=[1, 0])
        out, _ = normalize_to_unit(ds)
        np.testing.assert_array_equal(out.labels, [1, 0])


class TestCsv:
    def test_parse_two_by_two(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.5,0.5\n0.1,0.9\n")
        ds = load_csv(path)
        np.testing.assert_array_equal(ds.points, [[0.5, 0.5], [0.1, 0.9]])
        assert ds.labels is None

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = np.concatenate([
            rng.standard_normal((20, 3)) * 1e-15,
            rng.standard_normal((20, 3)) * 1e15,
            rng.random((20, 3)),
        ])
        path = tmp_path / "d.csv"
        save_csv(Dataset(pts), path)
        np.testing.assert_array_equal(load_csv(path).points, pts)

    def test_labeled_round_trip(self, tmp_path):
        ds = Dataset(np.array([[0.25, 0.5], [0.75, 0.5]]), labels=[3, 1])
        path = tmp_path / "d.csv"
        save_csv(ds, path)
        back = load_csv(path, labeled=True)
        np.testing.assert_array_equal(back.points, ds.points)
        np.testing.assert_array_equal(back.labels, [3, 1])

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,0.2\n0.3,0.4,0.5\n")
        with pytest.raises(FormatError) as err:
            load_csv(path)
        assert "line 2" in str(err.value)

    def test_non_numeric_cell_names_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("0.1,0.2\n0.3,oops\n")
        with pytest.raises(FormatError) as err:
            load_csv(path)
        assert "line 2" in str(err.value)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(FormatError):
            load_csv(path)


class TestIdx:
    def write_pair(self, tmp_path, images, labels):
        ip = tmp_path / "img.idx"
        lp = tmp_path / "lbl.idx"
        ip.write_bytes(helpers.idx_image_bytes(images))
        lp.write_bytes(helpers.idx_label_bytes(labels))
        return ip, lp

    def test_pixel_scaling(self, tmp_path):
        images = np.zeros((2, 28, 28), dtype=np.uint8)
        images[1] = 255
        ip, lp = self.write_pair(tmp_path, images, [0, 1])
        ds = load_idx(ip, lp)
        assert ds.points.shape == (2, 784)
        np.testing.assert_array_equal(ds.points[0], np.zeros(784))
        np.testing.assert_array_equal(ds.points[1], np.ones(784))
        np.testing.assert_array_equal(ds.labels, [0, 1])

    def test_intermediate_value(self, tmp_path):
        images = np.full((1, 28, 28), 51, dtype=np.uint8)
        ip, _ = self.write_pair(tmp_path, images, [7])
        ds = load_idx(ip)
        np.testing.assert_allclose(ds.points, 51.0 / 255.0, rtol=1e-15)

    def test_digit_filter(self, tmp_path):
        images = np.arange(3 * 28 * 28, dtype=np.uint64).reshape(3, 28, 28) % 256
        ip, lp = self.write_pair(tmp_path, images.astype(np.uint8), [1, 8, 1])
        ds = load_idx(ip, lp, digit_filter=1)
        assert ds.n == 2
        assert set(ds.labels.tolist()) == {1}

    def test_filter_without_labels_rejected(self, tmp_path):
        ip, _ = self.write_pair(tmp_path, np.zeros((1, 28, 28), np.uint8), [0])
        with pytest.raises(ValidationError):
            load_idx(ip, digit_filter=1)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "img.idx"
        blob = bytearray(helpers.idx_image_bytes(np.zeros((1, 28, 28), np.uint8)))
        blob[3] = 0x99
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError):
            load_idx(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "img.idx"
        blob = helpers.idx_image_bytes(np.zeros((2, 28, 28), np.uint8))
        path.write_bytes(blob[:-100])
        with pytest.raises(FormatError):
            load_idx(path)

    def test_label_count_mismatch_rejected(self, tmp_path):
        ip, lp = self.write_pair(tmp_path, np.zeros((2, 28, 28), np.uint8), [0])
        with pytest.raises(FormatError):
            load_idx(ip, lp)


class TestRotateImage:
    def random_image(self, seed=0):
        return np.random.default_rng(seed).random(784)

    def test_angle_zero_is_identity(self):
        img = self.random_image()
        np.testing.assert_allclose(rotate_image(img, 0.0), img, atol=1e-15)

    def test_full_turn_is_identity(self):
        img = self.random_image(1)
        np.testing.assert_allclose(rotate_image(img, 360.0), img, atol=1e-6)

    def test_half_turn_twice_matches_full_turn(self):
        img = self.random_image(2)
        twice = rotate_image(rotate_image(img, 180.0), 180.0)
        np.testing.assert_allclose(twice, rotate_image(img, 360.0), atol=1e-6)

    def test_out_of_frame_pixels_are_zero(self):
        rotated = rotate_image(np.ones(784), 45.0).reshape(28, 28)
        assert rotated[0, 0] == 0.0
        assert rotated[27, 27] == 0.0
        assert rotated[13, 13] == pytest.approx(1.0, abs=1e-12)

    def test_output_stays_in_unit_interval(self):
        img = self.random_image(3)
        for angle in (17.0, 90.0, 233.5):
            out = rotate_image(img, angle)
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_wrong_length_rejected(self):
        with pytest.raises(ShapeError):
            rotate_image(np.ones(100), 90.0)


class TestDataset:
    def test_requires_rows(self):
        with pytest.raises(ValidationError):
            Dataset(np.zeros((0, 2)))

    def test_labels_length_checked(self):
        with pytest.raises(ShapeError):
            Dataset(np.zeros((2, 2)), labels=[1])

    def test_points_coerced_to_float64(self):
        ds = Dataset([[1, 2], [3, 4]])
        assert ds.points.dtype == np.float64
        assert ds.dim == 2 and ds.n == 2
