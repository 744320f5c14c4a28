import numpy as np
import pytest

from gsvdlab.blackbox import BlackBox
from gsvdlab.data import synth_blobs
from gsvdlab.svdnet import NetConfig, TrainConfig, train


def wave_map(x):
    t = x[0]
    return np.array([10 * t * np.cos(t), t * np.sin(t) * np.cos(t)])


@pytest.fixture
def wave_box():
    return BlackBox(wave_map, 1, 2, name="wave")


@pytest.fixture(scope="session")
def blob_run():
    """2-class 2-D blobs and a small trained SvdNet (seeded)."""
    data = synth_blobs(2, 1000, 2, 10.0, seed=0)
    tr, rest = data.split(400, seed=0)
    cons, hold = rest.split(1000, seed=1)
    net, hist = train(tr.x, tr.labels, TrainConfig(epochs=200), NetConfig(hidden=(32,)))
    return {"train": tr, "construct": cons, "holdout": hold.subset(np.arange(500)), "net": net, "history": hist}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion label")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)
