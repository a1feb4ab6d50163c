import pytest

from ganbalance.numerics import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compile once up front so timed tests measure math, not compilation.
    kernels.warmup()
