import numpy as np
import pytest
from _shared import toy_generator, toy_model as _toy_model


@pytest.fixture(scope="session")
def toy():
    return toy_generator()


@pytest.fixture(scope="session")
def toy_model():
    return _toy_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("II2S_CACHE_DIR", str(tmp_path / "cache"))
