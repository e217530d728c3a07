import numpy as np
import pytest

from petkin.config import load_config
from petkin.dataset import build_dataset
from petkin.kinetics import FrameModel


@pytest.fixture(scope="session")
def fdg():
    return load_config("task1")


@pytest.fixture(scope="session")
def fmz():
    return load_config("task2")


@pytest.fixture(scope="session")
def fdg_model(fdg):
    return FrameModel(fdg.input_function, fdg.tracer, fdg.schedule)


@pytest.fixture(scope="session")
def fmz_model(fmz):
    return FrameModel(fmz.input_function, fmz.tracer, fmz.schedule)


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    """A small seeded desk-scale dataset (6 samples: 4 train, 2 test)."""
    cfg = load_config("desk").with_overrides(dataset={"n_train": 4, "n_test": 2})
    out = tmp_path_factory.mktemp("desk") / "data"
    build_dataset(cfg, out, threads=1)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
