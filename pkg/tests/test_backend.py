import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tricontact import backend

compiled = pytest.mark.skipif(backend.compiled_run_events is None, reason="compiled kernel not built")


def run(kernel, states, sites, draws, q, greedy, bl, br):
    n = len(sites)
    out = (np.empty(n, np.int8), np.empty(n, np.int64), np.empty(n, np.int64),
           np.empty(n, np.int64), np.empty(n, np.int8))
    st_ = states.copy()
    kernel(st_, sites, draws, q, greedy, bl, br, *out)
    return st_, out


@compiled
@given(st.lists(st.integers(0, 2), min_size=1, max_size=30), st.integers(0, 2**32 - 1),
       st.floats(0, 1), st.booleans(), st.integers(0, 2), st.integers(0, 2))
@settings(max_examples=200, deadline=None)
def test_kernels_agree(states, seed, q, greedy, bl, br):
    rng = np.random.default_rng(seed)
    states = np.array(states, dtype=np.int8)
    m = int(rng.integers(0, 200))
    sites = rng.integers(0, len(states), m).astype(np.int64)
    draws = rng.random(m)
    a = run(backend.compiled_run_events, states, sites, draws, q, int(greedy), bl, br)
    b = run(backend.python_run_events, states, sites, draws, q, int(greedy), bl, br)
    assert np.array_equal(a[0], b[0])
    for x, y in zip(a[1], b[1]):
        assert np.array_equal(x, y)


def test_env_var_forces_python():
    code = "from tricontact import backend; print(backend.NAME)"
    env = dict(os.environ, TRICONTACT_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_selected_backend_name():
    assert backend.NAME in ("cython", "python")
    if backend.compiled_run_events is not None and os.environ.get("TRICONTACT_BACKEND", "") != "python":
        assert backend.NAME == "cython"
