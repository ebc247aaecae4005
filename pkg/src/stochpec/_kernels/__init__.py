"""Monte Carlo kernel selection: compiled extension if built, numpy otherwise.

Set ``STOCHPEC_PURE=1`` to force the numpy implementation.
"""

import os

from . import _mc_pure

BACKEND = "python"
run_block = _mc_pure.run_block

if os.environ.get("STOCHPEC_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _mc_kernel
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        run_block = _mc_kernel.run_block

BACKENDS = {"python": _mc_pure.run_block}
try:
    from . import _mc_kernel as _compiled
    BACKENDS["cython"] = _compiled.run_block
except ImportError:
    pass
