"""The compiled kernels must be bit-identical to the numpy reference."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acqkd import _kernels_py, kernels
from acqkd.linkmodel import preset
from acqkd.simengine import probability_table

compiled = kernels.backends().get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None, reason="extension not built")


@needs_compiled
@pytest.mark.parametrize("start,n", [(0, 1), (0, 1000), (12345, 777), (2**30, 64)])
def test_sample_pulses_identical(start, n):
    table = probability_table(*preset("10km", mu=5.0))
    a = _kernels_py.sample_pulses(99, start, n, table)
    b = compiled.sample_pulses(99, start, n, table)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 3000))
def test_half_subset_identical(key, n):
    np.testing.assert_array_equal(_kernels_py.half_subset(key, n), compiled.half_subset(key, n))


@needs_compiled
@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2000), st.integers(0, 40))
def test_subset_parities_identical(key, n, m):
    bits = np.random.default_rng(key % 1000).integers(0, 2, n, dtype=np.uint8)
    np.testing.assert_array_equal(
        _kernels_py.subset_parities(bits, key, m), compiled.subset_parities(bits, key, m)
    )


def test_half_subset_properties(backend):
    for n in (0, 1, 2, 5, 100, 101):
        s = backend.half_subset(3, n)
        assert len(s) == n // 2
        assert np.all(np.diff(s) > 0)
        assert len(s) == 0 or (s.min() >= 0 and s.max() < n)


def test_env_var_forces_python_backend():
    code = "from acqkd import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, ACQKD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
