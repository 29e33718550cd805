import pytest


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # Compile the numba kernels once so no timed test pays for JIT.
    from lasersolve import _kernels

    _kernels.warm_up()
