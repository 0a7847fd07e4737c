import numpy as np
import pytest

from tseg import _kernels


@pytest.fixture
def restore_backend():
    """Let a test switch kernel backends without leaking into others."""
    name = _kernels.backend_name()
    yield
    _kernels.use_backend(name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
