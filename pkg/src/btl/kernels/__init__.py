"""Point-batch kernel backend selection.

The compiled extension (``_core``) is used when it imported successfully;
otherwise the numpy backend (``pure``).  Set ``BTL_PURE_KERNELS=1`` to force
the fallback, e.g. for benchmarking one against the other.
"""

import os

from . import pure

if os.environ.get("BTL_PURE_KERNELS", "") == "1":
    _backend = pure
else:
    try:
        from . import _core as _backend
    except ImportError:
        _backend = pure

BACKEND = "compiled" if _backend is not pure else "pure"

u_val = _backend.u_val
u_grad = _backend.u_grad
psi0_val = _backend.psi0_val
psi_all = _backend.psi_all
h_val = _backend.h_val
h_grad_x = _backend.h_grad_x
h_grad_y = _backend.h_grad_y
tower_val = _backend.tower_val
tower_val_grad = _backend.tower_val_grad
