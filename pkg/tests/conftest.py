import numpy as np
import pytest

from mirrorsink.geometry import build_database, rectangle_room, wall_ula

LAM = 0.125
USERS = ((7.0, 12.0), (9.0, 13.0))


def make_db(n=6, room=(0, 0, 20, 30), walls=("bottom", "left"), lam=LAM):
    by_id = {w.id: w for w in rectangle_room(*room)}
    arrays = [wall_ula(by_id[w], n, lam / 2) for w in walls]
    return build_database(list(by_id.values()), arrays)


@pytest.fixture(scope="session")
def db6():
    return make_db(6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    X = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return X @ X.conj().T / rank
