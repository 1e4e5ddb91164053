"""Synthetic point clouds for the experiments."""

import numpy as np

from .measures import ParticleCloud


def swiss_roll(n=2000, noise=0.02, seed=0):
    """Planar Swiss roll in the unit box.

    Angle ``th ~ U[1.5 pi, 4.5 pi]``, point ``(th cos th, th sin th) / (4.5 pi)``
    plus ``N(0, noise^2 I)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    th = rng.uniform(1.5 * np.pi, 4.5 * np.pi, n)
    pts = np.stack([th * np.cos(th), th * np.sin(th)], axis=1) / (4.5 * np.pi)
    return ParticleCloud(pts + noise * rng.standard_normal(pts.shape))
