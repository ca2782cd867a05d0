"""Select the compiled kernels when available, the pure-Python ones otherwise.

Set ``FRECHET_INFER_BACKEND=python`` to force the fallback.
"""

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

if os.environ.get("FRECHET_INFER_BACKEND", "").lower() == "python":
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:  # extension not built
        logger.info("compiled kernels unavailable, using pure-Python fallback")
        kernels = _pykernels
        BACKEND = "python"

STATUS_ANTIPODAL = _pykernels.STATUS_ANTIPODAL

__all__ = ["kernels", "BACKEND", "STATUS_ANTIPODAL"]
