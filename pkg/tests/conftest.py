from pathlib import Path

import numpy as np
import pytest

from leafkit.augment import Image

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_image(rng, height=8, width=8) -> Image:
    return Image(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


@pytest.fixture
def random_image(rng) -> Image:
    return make_image(rng)
