import numpy as np
import pytest

from fortpipe.pipeline import compile_corpus
from fortpipe.swcorpus import ModelParams

GOLDEN_DIR = "tests/goldens"


@pytest.fixture(scope="session")
def params8():
    return ModelParams(nx=8, ny=8, nt=3)


@pytest.fixture(scope="session")
def compiled8(params8):
    return compile_corpus(params8)


@pytest.fixture(scope="session")
def params16():
    return ModelParams(nx=16, ny=16, nt=20)


@pytest.fixture(scope="session")
def host_values(params8):
    return {k: np.float32(getattr(params8, k)) for k in ("dt", "dx", "dy", "g", "eps", "hmin")}
