import numpy as np
import pytest

from ensemble_ssl.data import stratified_split
from ensemble_ssl.harness.config import TrainConfig
from ensemble_ssl.harness.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(SyntheticSpec(n_examples=240, n_languages=2, signal_vocab=20,
                                            filler_vocab=10, seed=3))


@pytest.fixture(scope="session")
def small_pools(small_corpus):
    return stratified_split(small_corpus, (0.2, 0.6, 0.2), seed=3)


@pytest.fixture
def fast_config():
    return TrainConfig(epochs=4, warmup_epochs=2, batch_size=16, lr=0.5, embed_dim=8,
                       recheck_period=2, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])
