import numpy as np
import pytest

from lccgen.autoencoder import AutoEncoder, embed, load_autoencoder, save_autoencoder, train_ae
from lccgen.data import Dataset
from lccgen.numeric import ShapeError, Tensor, forward, make_rng
from lccgen.numeric.nn import Layer, NetworkParams


def _linear(w, act="identity"):
    return NetworkParams([Layer(Tensor(w), Tensor(np.zeros(w.shape[1])), act)])


def test_single_point_memorised():
    ds = Dataset(np.tile([[0.3, -0.5, 0.8]], (64, 1)))
    ae, losses = train_ae(ds, latent_dim=1, epochs=200, seed=0)
    assert ae.reconstruction_mse(ds) < 1e-3
    assert losses[-1] <= losses[0]


def test_line_segment_in_r10():
    rng = make_rng(1)
    direction = rng.normal(size=10)
    direction /= np.linalg.norm(direction)
    offset = 0.1 * rng.normal(size=10)
    x = offset + rng.uniform(-0.8, 0.8, size=(400, 1)) * direction
    # a rank-1 PCA fit leaves (numerically) nothing, so the data really is a line
    centred = x - x.mean(axis=0)
    s = np.linalg.svd(centred, compute_uv=False)
    assert np.sum(s[1:] ** 2) / x.size < 1e-20
    ae, losses = train_ae(Dataset(x), latent_dim=1, epochs=60, seed=0)
    assert losses[-1] < 1e-2
    assert ae.reconstruction_mse(Dataset(x)) < 1e-2
    assert losses[-1] <= losses[0]


def test_training_is_deterministic():
    x = make_rng(2).normal(size=(50, 3))
    a, la = train_ae(Dataset(x), 2, 3, seed=5)
    b, lb = train_ae(Dataset(x), 2, 3, seed=5)
    assert la == lb
    np.testing.assert_array_equal(embed(a, x), embed(b, x))


def test_expansion_flagged():
    with pytest.warns(UserWarning):
        ae, _ = train_ae(Dataset(np.zeros((8, 2))), latent_dim=3, epochs=1, seed=0)
    assert ae.notes and "expands" in ae.notes[0]


def test_bad_arguments():
    with pytest.raises(ValueError):
        train_ae(Dataset(np.zeros((4, 2))), 0, 1, seed=0)
    with pytest.raises(ValueError):
        train_ae(Dataset(np.zeros((4, 2))), 1, 0, seed=0)


class TestEmbed:
    def test_identity_encoder(self):
        ae = AutoEncoder(_linear(np.eye(3)), _linear(np.eye(3)))
        x = make_rng(3).normal(size=(5, 3))
        np.testing.assert_array_equal(embed(ae, x), x)

    def test_zero_tanh_encoder(self):
        ae = AutoEncoder(_linear(np.zeros((3, 2)), "tanh"), _linear(np.zeros((2, 3))))
        np.testing.assert_array_equal(embed(ae, np.ones((4, 3))), np.zeros((4, 2)))

    def test_equals_forward_and_is_row_wise(self):
        x = make_rng(4).normal(size=(30, 4))
        ae, _ = train_ae(Dataset(x), 2, 2, seed=1)
        h = embed(ae, Dataset(x))
        np.testing.assert_array_equal(h, forward(ae.encoder, x).data)
        perm = make_rng(5).permutation(30)
        np.testing.assert_allclose(embed(ae, x[perm]), h[perm], rtol=0, atol=1e-15)
        assert np.all(np.abs(h) < 1.0)  # tanh latent layer

    def test_shape_mismatch(self):
        ae = AutoEncoder(_linear(np.eye(3)), _linear(np.eye(3)))
        with pytest.raises(ShapeError):
            embed(ae, np.zeros((2, 4)))

    def test_latent_dims_must_agree(self):
        with pytest.raises(ShapeError):
            AutoEncoder(_linear(np.eye(3)), _linear(np.zeros((2, 3))))


def test_checkpoint_round_trip(tmp_path):
    x = make_rng(6).normal(size=(20, 3))
    ae, _ = train_ae(Dataset(x), 2, 1, seed=0)
    save_autoencoder(ae, tmp_path / "ae.json")
    back = load_autoencoder(tmp_path / "ae.json")
    np.testing.assert_array_equal(embed(back, x), embed(ae, x))
    np.testing.assert_array_equal(back.reconstruct(x), ae.reconstruct(x))
