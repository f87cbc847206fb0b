import numpy as np
import pytest

from fcrkit.backend import available_backends, kernels_for


@pytest.fixture(params=available_backends())
def kernel_backend(request):
    """Run a test against every built kernel backend."""
    return kernels_for(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
