"""Select the compiled search kernel when available, else the Python mirror.

KNAPXBAR_FORCE_FALLBACK=1 forces the pure-Python kernel. Both produce
byte-identical results from the same seed; see _kernel_py for the protocol.
"""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("KNAPXBAR_FORCE_FALLBACK"):
    _impl = _kernel_py
    HAVE_EXTENSION = False
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]

        HAVE_EXTENSION = True
    except ImportError:
        _impl = _kernel_py
        HAVE_EXTENSION = False

KERNEL_NAME = "compiled" if HAVE_EXTENSION else "python"

read_energy = _impl.read_energy
run_trial_kernel = _impl.run_trial_kernel


def implementations():
    """All importable kernel implementations, name -> module."""
    impls = {"python": _kernel_py}
    try:
        from . import _kernel

        impls["compiled"] = _kernel
    except ImportError:
        pass
    return impls
