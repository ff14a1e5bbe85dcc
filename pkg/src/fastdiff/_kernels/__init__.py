"""Kernel backend selection.

The compiled Cython kernel is preferred when its extension module built;
otherwise the numpy/scipy reference implementation is used.  Setting
FASTDIFF_PURE_PYTHON=1 forces the fallback, which is how the benchmark and
the agreement tests pin each side explicitly.
"""

import os

from . import _pyref

if os.environ.get("FASTDIFF_PURE_PYTHON", "").strip().lower() not in ("", "0", "false", "no"):
    _impl = _pyref
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pyref

BACKEND = _impl.BACKEND
pair_step = _impl.pair_step
thomas_solve = _impl.thomas_solve

SOURCE_COUPLED = _pyref.SOURCE_COUPLED
SOURCE_NONE = _pyref.SOURCE_NONE
SOURCE_SHIFTED = _pyref.SOURCE_SHIFTED
SOURCE_FROZEN = _pyref.SOURCE_FROZEN

SOURCE_MODES = {
    "coupled": SOURCE_COUPLED,
    "none": SOURCE_NONE,
    "shifted": SOURCE_SHIFTED,
    "frozen": SOURCE_FROZEN,
}

__all__ = [
    "BACKEND",
    "SOURCE_COUPLED",
    "SOURCE_FROZEN",
    "SOURCE_MODES",
    "SOURCE_NONE",
    "SOURCE_SHIFTED",
    "pair_step",
    "thomas_solve",
]
