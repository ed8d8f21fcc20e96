"""Backend selection for the compiled hot kernels.

At import time the compiled extension (exactabc._core, built from Cython) is
preferred; the pure-numpy implementation (exactabc._core_np) is the fallback.
Set EXACTABC_BACKEND=python or EXACTABC_BACKEND=compiled to force one; forcing
the compiled backend when it is not built raises ImportError.

Both backends produce bitwise-identical results; they differ only in speed
(the Gibbs sweep kernel is roughly an order of magnitude faster compiled, see
benchmarks/bench_backends.py).
"""

import os

_requested = os.environ.get("EXACTABC_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _core_np as _impl

        BACKEND = "python"
elif _requested == "compiled":
    from . import _core as _impl

    BACKEND = "compiled"
elif _requested == "python":
    from . import _core_np as _impl

    BACKEND = "python"
else:
    raise ImportError(
        f"EXACTABC_BACKEND must be 'auto', 'compiled' or 'python', got {_requested!r}"
    )

gibbs_sweeps = _impl.gibbs_sweeps
