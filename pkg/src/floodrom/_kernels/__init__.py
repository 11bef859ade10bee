"""Backend selection for the per-step hot kernels.

Two interchangeable implementations exist: a compiled Cython extension
(``_core``) and a pure-NumPy fallback (``_pure``).  The compiled one is
preferred when importable; set ``FLOODROM_BACKEND=pure`` or
``FLOODROM_BACKEND=compiled`` to force a choice (forcing ``compiled`` when
the extension is missing raises at import).

Both backends implement the same functions with bit-identical results; see
``_pure`` for the contract and ``tests/test_kernels.py`` for the
equivalence suite.
"""

import os

from . import _pure

_FORCED = os.environ.get("FLOODROM_BACKEND", "").strip().lower()

if _FORCED == "pure":
    _impl = _pure
elif _FORCED == "compiled":
    from . import _core as _impl  # noqa: F401  (ImportError is the contract)
elif _FORCED == "":
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pure
else:
    raise ImportError(
        f"FLOODROM_BACKEND={_FORCED!r} not recognized (use 'pure' or 'compiled')"
    )

BACKEND_NAME = _impl.BACKEND_NAME

face_mobility_avg = _impl.face_mobility_avg
face_mobility_upwind = _impl.face_mobility_upwind
phase_face_fluxes = _impl.phase_face_fluxes
accumulate_cell_inflow = _impl.accumulate_cell_inflow
accumulate_cell_outflow = _impl.accumulate_cell_outflow
tpfa_csr_values = _impl.tpfa_csr_values
clipped_saturation_update = _impl.clipped_saturation_update


def get_backend(name):
    """Return a backend module by name ('pure' or 'compiled')."""
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
