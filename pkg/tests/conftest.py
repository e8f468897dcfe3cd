import numpy as np
import pytest

from airwayseg import backend


@pytest.fixture(params=backend.available_backends())
def backend_name(request):
    """Run the test once per available kernel backend, restoring 'auto' after."""
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend("auto")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
