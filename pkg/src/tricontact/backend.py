"""Select the event kernel at import time.

The compiled extension is used when it was built; ``TRICONTACT_BACKEND=python``
forces the pure-Python fallback.
"""
import os

from . import _pykernel

python_run_events = _pykernel.run_events
compiled_run_events = None

try:
    from ._ckernel import run_events as compiled_run_events
except ImportError:  # extension not built
    pass

if compiled_run_events is not None and os.environ.get("TRICONTACT_BACKEND", "").lower() != "python":
    NAME = "cython"
    run_events = compiled_run_events
else:
    NAME = "python"
    run_events = python_run_events
