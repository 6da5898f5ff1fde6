import numpy as np
import pytest

from bluelink.harness import content


@pytest.fixture(scope="session")
def corpus():
    return content.default_corpus(size=(320, 180), count=12, seed=7)


@pytest.fixture(scope="session")
def bright_frame():
    rng = np.random.default_rng(21)
    return content.make_content_frame((320, 180), rng, "bright")
