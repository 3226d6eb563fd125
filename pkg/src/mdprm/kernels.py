"""Backend selection for the EVI sweeps.

The compiled extension is used when it imports; set ``MDPRM_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
evi_l1 = _kernels_py.evi_l1
evi_box = _kernels_py.evi_box

if os.environ.get("MDPRM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        evi_l1 = _compiled.evi_l1
        evi_box = _compiled.evi_box
