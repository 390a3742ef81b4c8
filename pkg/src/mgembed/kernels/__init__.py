"""SkipGram training kernels.

The compiled extension ``_sgns`` is used when it was built; otherwise the
pure-Python ``_sgns_py`` takes over. Set ``MGEMBED_BACKEND=python`` to force
the fallback.
"""
import os

from . import _sgns_py

python_sgns_pairs = _sgns_py.sgns_pairs

try:
    from ._sgns import sgns_pairs as compiled_sgns_pairs
except ImportError:  # extension not built
    compiled_sgns_pairs = None

if compiled_sgns_pairs is not None and os.environ.get("MGEMBED_BACKEND", "").lower() != "python":
    BACKEND = "cython"
    sgns_pairs = compiled_sgns_pairs
else:
    BACKEND = "python"
    sgns_pairs = python_sgns_pairs

__all__ = ["BACKEND", "sgns_pairs", "python_sgns_pairs", "compiled_sgns_pairs"]
