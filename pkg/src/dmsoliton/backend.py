"""Select the kernel backend: compiled core if importable, NumPy otherwise.

``DMSOLITON_FORCE_PY=1`` forces the fallback (used by the benchmark and by
CI to exercise both paths).
"""
import os

if os.environ.get("DMSOLITON_FORCE_PY") == "1":
    from dmsoliton import _kernels_py as kernels
else:
    try:
        from dmsoliton import _core as kernels  # type: ignore[no-redef]
    except ImportError:
        from dmsoliton import _kernels_py as kernels  # type: ignore[no-redef]

BACKEND = kernels.BACKEND
