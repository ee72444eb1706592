import numpy as np
import pytest

from celltrack.pipeline import train_model
from celltrack.siamese import TrainConfig
from celltrack.simulator import preset, simulate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def drifting_model():
    """Heads trained with default hyperparameters on a drifting sequence (seed 8)."""
    return train_model([simulate(preset("drifting", seed=8))], TrainConfig(seed=8)).heads


@pytest.fixture(scope="session")
def mitosis_model():
    return train_model([simulate(preset("mitosis-heavy", seed=43))], TrainConfig(seed=43)).heads


def random_label_map(rng, h, w, n_labels, fill=0.5):
    labels = rng.choice(np.arange(1, n_labels + 1), size=(h, w))
    labels[rng.random((h, w)) > fill] = 0
    return labels


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
