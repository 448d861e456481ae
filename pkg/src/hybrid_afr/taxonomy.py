"""The 30 face classes: 29 manufacturing features plus the stock face."""

from __future__ import annotations

from dataclasses import dataclass

N_CLASSES = 30
STOCK = 29

EDGE_PROFILING = "EdgeProfiling"
STEP = "Step"
SLOT = "Slot"
THROUGH = "Through"
BLIND = "Blind"
ADDITIVE = "Additive"
STOCK_GROUP = "Stock"


@dataclass(frozen=True)
class FeatureClass:
    index: int
    name: str
    display: str
    group: str
    additive: bool = False


_TABLE = [
    (0, "chamfer", "Chamfer", EDGE_PROFILING),
    (1, "through hole", "Thru Hole", THROUGH),
    (2, "triangular passage", "Triangular Passage", THROUGH),
    (3, "rectangular passage", "Rectangular Passage", THROUGH),
    (4, "six-sided passage", "6-sided Passage", THROUGH),
    (5, "triangular through slot", "Triangular Thru Slot", SLOT),
    (6, "rectangular through slot", "Rectangular Thru Slot", SLOT),
    (7, "circular through slot", "Circular Thru Slot", SLOT),
    (8, "rectangular through step", "Rectangular Thru Step", STEP),
    (9, "two-sided through step", "2-sided Thru Step", STEP),
    (10, "slanted through step", "Slanted Thru Step", STEP),
    (11, "o-ring", "O-ring", BLIND),
    (12, "blind hole", "Blind Hole", BLIND),
    (13, "triangular pocket", "Triangular Pocket", BLIND),
    (14, "rectangular pocket", "Rectangular Pocket", BLIND),
    (15, "six-sided pocket", "6-sided Pocket", BLIND),
    (16, "circular end pocket", "Circular End Pocket", BLIND),
    (17, "rectangular blind slot", "Rectangular Blind Slot", SLOT),
    (18, "vertical circular-end blind slot", "Vertical Circular End Blind Slot", SLOT),
    (19, "horizontal circular-end blind slot", "Horizontal Circular End Blind Slot", SLOT),
    (20, "triangular blind step", "Triangular Blind Step", STEP),
    (21, "circular blind step", "Circular Blind Step", STEP),
    (22, "rectangular blind step", "Rectangular Blind Step", STEP),
    (23, "round", "Round", EDGE_PROFILING),
    (24, "cylindrical extrusion", "Cylindrical Extrusion", ADDITIVE),
    (25, "rectangular extrusion", "Rectangular Extrusion", ADDITIVE),
    (26, "triangular extrusion", "Triangular Extrusion", ADDITIVE),
    (27, "hexagonal extrusion", "Hexagonal Extrusion", ADDITIVE),
    (28, "pentagonal extrusion", "Pentagonal Extrusion", ADDITIVE),
    (29, "stock face", "Stock", STOCK_GROUP),
]

_CLASSES = tuple(FeatureClass(i, n, d, g, g == ADDITIVE) for i, n, d, g in _TABLE)
ADDITIVE_CLASSES = frozenset(c.index for c in _CLASSES if c.additive)
NO_DEPTH_AXIS = frozenset({0, 23})


def taxonomy() -> list[FeatureClass]:
    return list(_CLASSES)


def feature_class(index: int) -> FeatureClass:
    if not 0 <= int(index) < N_CLASSES:
        raise KeyError(f"no feature class {index}")
    return _CLASSES[int(index)]


def by_name(name: str) -> FeatureClass:
    key = name.strip().lower()
    for c in _CLASSES:
        if c.name == key or c.display.lower() == key:
            return c
    raise KeyError(name)


def label_name(index: int) -> str:
    c = feature_class(index)
    return f"{c.display} ({c.index})"
