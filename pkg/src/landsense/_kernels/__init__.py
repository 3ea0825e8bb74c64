"""Kernel backend selection.

The compiled extension is preferred when present; the pure-Python reference
is the fallback. Both expose the same functions and produce bit-identical
results. Set LANDSENSE_BACKEND=python (or =compiled) to force one side, e.g.
for the parity tests and the backend benchmark.
"""
import os

from . import pyref

_forced = os.environ.get("LANDSENSE_BACKEND", "").strip().lower()

if _forced == "python":
    impl = pyref
elif _forced == "compiled":
    from . import _speedups as impl  # noqa: F401  (ImportError is the signal)
else:
    try:
        from . import _speedups as impl
    except ImportError:
        impl = pyref

BACKEND = impl.BACKEND_NAME

traverse_segment = impl.traverse_segment
gain_matrix = impl.gain_matrix
best_split = impl.best_split
tree_predict = impl.tree_predict
