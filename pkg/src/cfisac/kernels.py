"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``CFISAC_PURE_PYTHON=1`` to force the fallback.
``pa_sample_moments`` always uses numpy: its matmul goes to BLAS and beats
the compiled loop (see benchmarks/bench_kernels.py).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("CFISAC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

segment_sum = _impl.segment_sum
segment_max = _impl.segment_max
repair_spacing = _impl.repair_spacing
pa_sample_moments = _kernels_py.pa_sample_moments
