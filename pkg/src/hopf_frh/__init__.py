"""Explicit Hopf bifurcation criterion for fractional-order systems, 1 < alpha < 2."""

__version__ = "0.1.0"

from .errors import HopfError  # noqa: E402
from .polycore import CharPoly, ComplexRoot, roots, sector_classify  # noqa: E402
from .frh import (Verdict, build_matrix, classify, critical_roots, minors,  # noqa: E402
                  minors_of, rotate)
from .bifurcate import (ParamSystem, find_degenerate, grid_scan,  # noqa: E402
                        refine_on_segment, transversality)

__all__ = [
    "HopfError", "CharPoly", "ComplexRoot", "roots", "sector_classify", "Verdict",
    "build_matrix", "classify", "critical_roots", "minors", "minors_of", "rotate",
    "ParamSystem", "find_degenerate", "grid_scan", "refine_on_segment", "transversality",
]
