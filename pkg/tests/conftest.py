import random

import pytest

from helpers import WireServer


@pytest.fixture
def rng():
    return random.Random(20260814)


@pytest.fixture
def wire_server():
    with WireServer() as server:
        yield server
