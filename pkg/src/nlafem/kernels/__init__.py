"""Assembly kernel backend selection.

The compiled Cython kernels are used when importable; set NLAFEM_PURE_PY=1
to force the numpy fallback. Both backends share contracts and tolerances
(deterministic summation order, results agree to roundoff).
"""

import os

from . import _numpy

if os.environ.get("NLAFEM_PURE_PY"):
    BACKEND = "numpy"
    stiffness_local = _numpy.stiffness_local
    weighted_mass_local = _numpy.weighted_mass_local
else:
    try:
        from . import _speedup

        BACKEND = "cython"
        stiffness_local = _speedup.stiffness_local
        weighted_mass_local = _speedup.weighted_mass_local
    except ImportError:
        BACKEND = "numpy"
        stiffness_local = _numpy.stiffness_local
        weighted_mass_local = _numpy.weighted_mass_local

__all__ = ["BACKEND", "stiffness_local", "weighted_mass_local"]
