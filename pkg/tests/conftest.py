import numpy as np
import pytest

from stereospoof.geometry import CameraIntrinsics, compose_projection
from stereospoof.pipeline import PipelineConfig, load_inputs, run_train
from stereospoof.synth import SynthConfig, synth_generate


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def rectified_rig():
    """Identity rotation, 60 mm baseline along x, fx=fy=500, 640x480 frame."""
    intr = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)
    return compose_projection(intr, intr, np.eye(3), np.array([60.0, 0.0, 0.0]))


TINY_SYNTH = SynthConfig(
    seed=42, n_template=4, n_train_per_class=8, n_average_per_class=4, n_test_per_class=6
)
TINY_PIPELINE = PipelineConfig(
    seed=7, codebook_k=64, codebook_max_samples=20_000, codebook_max_iters=25
)


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_synth")
    synth_generate(TINY_SYNTH, out)
    return out


@pytest.fixture(scope="session")
def tiny_dataset(tiny_dataset_dir):
    return load_inputs(tiny_dataset_dir / "manifest.json", tiny_dataset_dir / "calibration.json")


@pytest.fixture(scope="session")
def tiny_bundle(tiny_dataset):
    return run_train(tiny_dataset, TINY_PIPELINE)
