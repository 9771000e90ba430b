import numpy as np
import pytest
from PIL import Image

from vit_extractor import create_test_checkpoint

# reduced fixed-input sides for the test checkpoints; small token grids
# keep the forward passes fast while widths stay registry-true
TEST_IMAGE_SIZES = {"clip-b32": 64, "clip-b16": 64, "clip-l14": 56, "sam-h": 64}


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory):
    """Lazy shared checkpoint directory: checkpoints('clip-b32') -> root."""
    root = tmp_path_factory.mktemp("checkpoints")
    made = set()

    def get(name):
        if name not in made:
            create_test_checkpoint(name, root,
                                   image_size=TEST_IMAGE_SIZES.get(name))
            made.add(name)
        return root

    return get


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Three 51x51 binary micrograph stand-ins with distinct content."""
    d = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(7)
    for i in range(3):
        labels = (rng.random((51, 51)) < 0.4 + 0.1 * i).astype(np.uint8)
        Image.fromarray(labels * 255, mode="L").save(d / f"sample_{i:02d}.png")
    return d
