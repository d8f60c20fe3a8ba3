"""GAN training with local coordinate coding sampling on learned latent manifolds."""
