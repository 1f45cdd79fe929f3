import pytest

from stgscale.fixtures import load_fixture
from stgscale.internode import build_library


@pytest.fixture(scope="session")
def jpeg():
    return load_fixture("jpeg")


@pytest.fixture(scope="session")
def jpeg_lib(jpeg):
    return build_library(jpeg.app, 4, jpeg.library)


@pytest.fixture(scope="session")
def nbody():
    return load_fixture("nbody")


@pytest.fixture(scope="session")
def nbody_lib(nbody):
    return build_library(nbody.app, 4, nbody.library)


@pytest.fixture(scope="session")
def chain3():
    return load_fixture("chain3")


@pytest.fixture(scope="session")
def diamond():
    return load_fixture("diamond")


@pytest.fixture(scope="session")
def rates3():
    return load_fixture("rates3")
