import pytest

from tcmap.config import Instance, bundled_instance_path, load_instance

BUNDLES = ("matmul-tiny", "matmul-re1", "conv-tiny", "conv-re2")


@pytest.fixture(scope="session")
def bundle():
    cache: dict[str, Instance] = {}

    def get(name: str) -> Instance:
        if name not in cache:
            cache[name] = load_instance(bundled_instance_path(name))
        return cache[name]

    return get
