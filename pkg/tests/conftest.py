import numpy as np
import pytest

from connstream.core import EpochMatrix


def make_epochs(n_trials, n_channels, n_samples, seed=0, sfreq=600.0):
    rng = np.random.default_rng(seed)
    return [EpochMatrix(data=rng.standard_normal((n_channels, n_samples)),
                        sfreq=sfreq, trial_index=k)
            for k in range(n_trials)]


@pytest.fixture
def small_epochs():
    return make_epochs(5, 4, 48, seed=7)
