import numpy as np
import pytest

from semvos.kernels import available_backends


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(params=sorted(available_backends()))
def backend(request, monkeypatch):
    """Run a test once per importable kernel backend."""
    from semvos import kernels

    impl = available_backends()[request.param]
    for name in ("label_components", "absorb_unlabeled", "near_mask"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param
