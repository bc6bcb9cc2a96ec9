"""Compiled HEOM kernels (Cython) and their pure-numpy twin.

``_rhs`` is the compiled module, built from ``_rhs.pyx`` by ``setup.py``.
``numpy_rhs`` is the fallback used when the extension is missing or when
``ANTENNA_HEOM_BACKEND=python`` is set.
"""
