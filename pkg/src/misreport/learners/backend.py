"""Tree-grower backend selection.

Prefers the compiled Cython grower, falls back to the pure-Python one.
``MISREPORT_BACKEND=python|cython`` forces a choice (cython raises if the
extension is unavailable). Both backends produce bit-identical models.
"""
import os

from . import _grow_py

_forced = os.environ.get("MISREPORT_BACKEND", "").lower()

if _forced == "python":
    grow_tree = _grow_py.grow_tree
    predict_margin = None
    BACKEND = "python"
else:
    try:
        from . import _split_cy

        grow_tree = _split_cy.grow_tree
        predict_margin = _split_cy.predict_margin
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        grow_tree = _grow_py.grow_tree
        predict_margin = None
        BACKEND = "python"
