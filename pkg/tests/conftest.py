import os
from pathlib import Path

import pytest

from mub6.core import DiscParams
from mub6.sets import SetBundle


@pytest.fixture(scope="session")
def set_dir(request) -> Path:
    """Generated set files shared across runs via the pytest cache."""
    override = os.environ.get("MUB6_SET_CACHE")
    if override:
        path = Path(override)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return Path(request.config.cache.mkdir("mub6-sets"))


@pytest.fixture(scope="session")
def bundles(set_dir):
    cache: dict[tuple[int, int], SetBundle] = {}

    def get(n: int, depth: int = 8) -> SetBundle:
        key = (n, depth)
        if key not in cache:
            cache[key] = SetBundle(DiscParams(n, depth), set_dir)
        return cache[key]

    return get
