import numpy as np
import pytest

from keyauth import synth


@pytest.fixture(scope="session")
def small_dataset():
    """5 subjects x 40 reps, enough for split and detector machinery."""
    return synth.synth_dataset(n_subjects=5, reps_per_subject=40, seed=11)


@pytest.fixture(scope="session")
def medium_dataset():
    """More subjects for classifier tests; still fast."""
    return synth.synth_dataset(n_subjects=8, reps_per_subject=60, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
