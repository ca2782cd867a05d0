import numpy as np
import pytest

from frechet_infer import _pykernels, spaces

try:
    from frechet_infer import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    monkeypatch.setattr(spaces, "kernels", BACKENDS[request.param])
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_laplacian(rng, m, C=3.0, density=1.0):
    w = rng.uniform(0, C, m * (m - 1) // 2) * (rng.random(m * (m - 1) // 2) < density)
    return spaces.vech_inverse(-w, m)


def random_unit(rng, r, size=None):
    shape = (r,) if size is None else (size, r)
    u = rng.standard_normal(shape)
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance summary")
        for line in RESULTS:
            terminalreporter.write_line(line)
