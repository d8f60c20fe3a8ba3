import numpy as np
import pytest

from lccgen.data import (
    ConfigError,
    Dataset,
    IdxFormatError,
    IdxTruncatedError,
    ManifoldSpec,
    area_pool_matrix,
    digits_8x8,
    generate,
    load_idx,
    normalize,
    read_csv,
    split,
    to_csv,
    write_idx_images,
    write_idx_labels,
)


def test_ring_without_noise_sits_on_mode_centers():
    spec = ManifoldSpec("ring_of_gaussians", n_modes=8, radius=2.0, sigma=0.0, seed=3)
    ds = generate(spec, 500)
    centers = spec.mode_centers()
    np.testing.assert_allclose(np.linalg.norm(centers, axis=1), 2.0, rtol=0, atol=1e-15)
    d = np.linalg.norm(ds.samples[:, None, :] - centers[None], axis=2)
    assert np.all(d.min(axis=1) == 0.0)


def test_swiss_roll_parametric_residual():
    ds = generate(ManifoldSpec("swiss_roll", noise=0.0, seed=1), 1000)
    x, z = ds.samples[:, 0], ds.samples[:, 2]
    t = np.hypot(x, z)  # t > 0, so |(t cos t, t sin t)| = t
    residual = np.hypot(x - t * np.cos(t), z - t * np.sin(t))
    assert residual.max() < 1e-9


def test_ring_mode_counts_multinomial():
    n, k = 10_000, 8
    spec = ManifoldSpec("ring_of_gaussians", n_modes=k, sigma=0.05, seed=0)
    ds = generate(spec, n)
    centers = spec.mode_centers()
    nearest = np.argmin(np.linalg.norm(ds.samples[:, None] - centers[None], axis=2), axis=1)
    counts = np.bincount(nearest, minlength=k)
    sd = np.sqrt(n * (1 / k) * (1 - 1 / k))
    assert np.all(np.abs(counts - n / k) <= 3 * sd)


def test_generate_is_pure():
    spec = ManifoldSpec("two_circles", noise=0.02, seed=5)
    np.testing.assert_array_equal(generate(spec, 100).samples, generate(spec, 100).samples)


def test_unknown_kind_and_bad_dims():
    with pytest.raises(ConfigError):
        ManifoldSpec("moons")
    with pytest.raises(ConfigError):
        ManifoldSpec("ring_of_gaussians", ambient_dim=2, intrinsic_dim=3)
    with pytest.raises(ConfigError):
        generate(ManifoldSpec(), 0)


def test_ambient_padding():
    ds = generate(ManifoldSpec("ring_of_gaussians", ambient_dim=5), 20)
    assert ds.dim == 5
    assert np.all(ds.samples[:, 2:] == 0.0)


class TestNormalize:
    def test_range(self):
        ds = normalize(generate(ManifoldSpec("swiss_roll", noise=0.1), 300))
        assert ds.samples.min() >= -1.0 and ds.samples.max() <= 1.0
        np.testing.assert_array_equal(ds.samples.min(axis=0), -1.0)
        np.testing.assert_array_equal(ds.samples.max(axis=0), 1.0)

    def test_idempotent(self):
        raw = generate(ManifoldSpec("ring_of_gaussians", sigma=0.1, seed=2), 400)
        once = normalize(raw)
        twice = normalize(once)
        np.testing.assert_array_equal(once.samples, twice.samples)
        np.testing.assert_array_equal(once.normalization.shift, twice.normalization.shift)
        np.testing.assert_array_equal(once.normalization.scale, twice.normalization.scale)

    def test_inverse(self):
        raw = generate(ManifoldSpec("ring_of_gaussians", sigma=0.1, seed=2), 400)
        ds = normalize(raw)
        np.testing.assert_allclose(ds.to_raw(), raw.samples, atol=1e-12)

    def test_constant_feature(self):
        ds = normalize(Dataset(np.array([[1.0, 3.0], [2.0, 3.0]])))
        np.testing.assert_array_equal(ds.samples[:, 1], 0.0)


def test_dataset_rejects_non_finite():
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]))


class TestSplit:
    def test_partition(self):
        ds = Dataset(np.arange(10.0)[:, None])
        tr, ho = split(ds, 0.8, seed=1)
        assert (len(tr), len(ho)) == (8, 2)
        merged = np.sort(np.concatenate([tr.samples[:, 0], ho.samples[:, 0]]))
        np.testing.assert_array_equal(merged, np.arange(10.0))

    def test_same_seed_same_split(self):
        ds = Dataset(np.arange(10.0)[:, None])
        a, b = split(ds, 0.5, 3), split(ds, 0.5, 3)
        np.testing.assert_array_equal(a[0].samples, b[0].samples)

    def test_different_seeds_differ(self):
        ds = Dataset(np.arange(10.0)[:, None])
        same = 0
        for s in range(100):
            a = split(ds, 0.8, 2 * s)[0].samples[:, 0]
            b = split(ds, 0.8, 2 * s + 1)[0].samples[:, 0]
            same += np.array_equal(a, b)
        assert same <= 1

    def test_fraction_range(self):
        with pytest.raises(ConfigError):
            split(Dataset(np.zeros((4, 1))), 1.0, 0)


class TestIdx:
    def _write(self, tmp_path, images, labels):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx_images(images, ip)
        write_idx_labels(labels, lp)
        return ip, lp

    def test_magic_numbers(self, tmp_path):
        ip, lp = self._write(tmp_path, np.zeros((2, 28, 28)), [3, 4])
        assert ip.read_bytes()[:4] == b"\x00\x00\x08\x03"
        assert lp.read_bytes()[:4] == b"\x00\x00\x08\x01"
        ds = load_idx(ip, lp, downsample_to=8)
        assert ds.samples.shape == (2, 64)
        np.testing.assert_array_equal(ds.labels, [3, 4])

    def test_wrong_magic(self, tmp_path):
        ip, lp = self._write(tmp_path, np.zeros((1, 28, 28)), [0])
        with pytest.raises(IdxFormatError):
            load_idx(lp, None)
        with pytest.raises(IdxFormatError):
            load_idx(ip, ip)

    def test_truncated_payload(self, tmp_path):
        ip, _ = self._write(tmp_path, np.zeros((3, 28, 28)), [0, 1, 2])
        ip.write_bytes(ip.read_bytes()[:-10])
        with pytest.raises(IdxTruncatedError):
            load_idx(ip)
        with pytest.raises(OSError):
            load_idx(ip)

    def test_constant_images(self, tmp_path):
        images = np.stack([np.zeros((28, 28)), np.full((28, 28), 255)])
        ip, lp = self._write(tmp_path, images, [0, 1])
        ds = load_idx(ip, lp, downsample_to=8)
        np.testing.assert_array_equal(ds.samples[0], np.full(64, -1.0))
        np.testing.assert_allclose(ds.samples[1], np.full(64, 1.0), rtol=0, atol=1e-12)

    def test_pooling_preserves_mass(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(1, 28, 28)).astype(float)
        from lccgen.data import mean_pool
        pooled = mean_pool(img, 8)
        assert pooled.mean() == pytest.approx(img.mean(), rel=1e-12)
        np.testing.assert_allclose(area_pool_matrix(28, 8).sum(axis=1), 1.0)


def test_digits_dataset():
    ds = digits_8x8()
    assert ds.samples.shape[1] == 64
    assert ds.samples.min() >= -1.0 and ds.samples.max() <= 1.0


def test_csv_round_trip(tmp_path):
    ds = generate(ManifoldSpec(seed=4), 30)
    to_csv(ds, tmp_path / "d.csv")
    np.testing.assert_array_equal(read_csv(tmp_path / "d.csv"), ds.samples)
