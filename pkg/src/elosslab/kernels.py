"""Backend selection for the hot kernels.

The compiled extension is used when it imports; ``ELOSSLAB_BACKEND=python``
forces the numpy fallback. Both expose ``pair_energy``, ``edge_energy`` and
``ising_ground_state`` with identical semantics.
"""
from __future__ import annotations

import os

from . import _kernels_py

python_backend = _kernels_py

try:
    from . import _kernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and os.environ.get("ELOSSLAB_BACKEND", "").lower() != "python":
    backend = compiled_backend
    BACKEND_NAME = "cython"
else:
    backend = _kernels_py
    BACKEND_NAME = "python"

pair_energy = backend.pair_energy
edge_energy = backend.edge_energy
ising_ground_state = backend.ising_ground_state
