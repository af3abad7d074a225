"""Backend selection for the hot kernels.

The compiled module ``randinv._kernels`` is used when it imports; otherwise,
or when ``RANDINV_PURE_PYTHON`` is set to a non-empty value, the numpy
fallback ``randinv._kernels_py`` is used.  Both expose the same functions and
produce identical random draws.
"""

import os

from . import _kernels_py

if os.environ.get("RANDINV_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

mix64 = _impl.mix64
stream_state = _impl.stream_state
uniforms = _impl.uniforms
stream_uniforms = _impl.stream_uniforms
lookup = _impl.lookup
draw_indices = _impl.draw_indices
draw_counts = _impl.draw_counts
cfn_pattern_probs = _impl.cfn_pattern_probs
cfn_coordinate_ascent = _impl.cfn_coordinate_ascent

GOLDEN = _kernels_py.GOLDEN
MASK64 = _kernels_py.MASK64
TWO_M53 = _kernels_py.TWO_M53

__all__ = [
    "BACKEND",
    "mix64",
    "stream_state",
    "uniforms",
    "stream_uniforms",
    "lookup",
    "draw_indices",
    "draw_counts",
    "cfn_pattern_probs",
    "cfn_coordinate_ascent",
]
