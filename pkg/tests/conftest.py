import numpy as np
import pytest

from pganet.model import build_toy_model, make_synth_dataset


def seed_statistics(model):
    """Zero-mean, unit-variance running stats so evaluation mode works without training."""
    for _, state in model.batchnorm_states():
        state.seed_running_stats(np.zeros(state.channels), np.ones(state.channels))


@pytest.fixture
def tiny_data():
    return make_synth_dataset(seed=0, num_ids=4, per_id=8, shape=(2, 4, 4))


@pytest.fixture
def tiny_model():
    return build_toy_model(in_channels=2, height=4, width=4, embed_dim=4, num_classes=4, depth=1, seed=0)


@pytest.fixture
def eval_model(tiny_model):
    seed_statistics(tiny_model)
    tiny_model.set_mode("evaluation")
    return tiny_model


@pytest.fixture
def seed_stats():
    return seed_statistics
