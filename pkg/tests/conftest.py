"""Shared fixtures: balanced mixture panels and the four-group benchmark set."""

import numpy as np

from ncsde.simulate import ArModel, DEFAULT_MODELS, _ar3_from_rng
from ncsde.spectral import TimeSeriesSet

# Four AR(3) groups with near-equal pairwise log-SDF separations; the
# innovation variances offset the uneven shape distances so that no single
# split dominates a WSS curve.
FOUR_GROUP_MODELS = (
    ArModel(DEFAULT_MODELS[0].phi, sigma2=1.0),
    ArModel(DEFAULT_MODELS[1].phi, sigma2=0.577),
    ArModel(DEFAULT_MODELS[2].phi, sigma2=0.519),
    ArModel((0.4, -0.2, 0.4), sigma2=1.125),
)


def balanced_panel(models, n, m, seed):
    """m series split evenly over the models, order shuffled; returns gold labels."""
    rng = np.random.default_rng(seed)
    k = len(models)
    gold = np.asarray([1 + i % k for i in range(m)])
    rng.shuffle(gold)
    columns = np.empty((n, m))
    for i, g in enumerate(gold):
        columns[:, i] = _ar3_from_rng(models[g - 1], n, rng)
    return TimeSeriesSet(columns), gold
