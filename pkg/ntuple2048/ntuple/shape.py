"""
Tuple geometry and the named architecture registry.

Symmetric sampling covers rotations and reflections, so an architecture only
fixes translation anchors. The placements below are declared choices that tile
the upper half of the board; every smaller tuple of the redundant variants lies
inside one of the 6-tuples so the network can be folded after training.
"""

from typing import Dict, List, Sequence, Tuple

from msgspec import Struct

from ntuple2048.constants import ALPHABET, BOARD_CELLS, VIEWS
from ntuple2048.error import ConfigurationError
from ntuple2048.ntuple.symmetry import SYMMETRIES, map_cells


def _rc(*coords: Tuple[int, int]) -> Tuple[int, ...]:
    return tuple(4 * r + c for r, c in coords)


# reference geometry of every shape name, anchored at the top-left corner
SHAPE_GEOMETRY: Dict[str, Tuple[int, ...]] = {
    "3": _rc((0, 0), (0, 1), (0, 2)),
    "4": _rc((0, 0), (0, 1), (0, 2), (0, 3)),
    "22": _rc((0, 0), (0, 1), (1, 0), (1, 1)),
    "33": _rc((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)),
    "42": _rc((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1)),
    "43": _rc((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2)),
    "421": _rc((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (2, 0)),
}


def _normalize(cells: Sequence[int]) -> Tuple[Tuple[int, int], ...]:
    coords = [(c // 4, c % 4) for c in cells]
    r0 = min(r for r, _ in coords)
    c0 = min(c for _, c in coords)
    return tuple(sorted((r - r0, c - c0) for r, c in coords))


def canonical_form(cells: Sequence[int]) -> Tuple[Tuple[int, int], ...]:
    """Smallest translated cell pattern over the eight board symmetries."""
    return min(_normalize(map_cells(cells, k)) for k in range(VIEWS))


_CANONICAL = {name: canonical_form(cells) for name, cells in SHAPE_GEOMETRY.items()}


def shape_name_for(cells: Sequence[int]) -> str:
    form = canonical_form(cells)
    for name, canonical in _CANONICAL.items():
        if canonical == form:
            return name
    raise ConfigurationError(f"cells {tuple(cells)} match no known tuple shape")


class TupleShape(Struct, frozen=True):
    name: str
    locations: Tuple[int, ...]
    redundant: bool = False

    def __post_init__(self):
        if self.name not in SHAPE_GEOMETRY:
            raise ConfigurationError(f"unknown tuple shape {self.name!r}")
        locs = self.locations
        if len(locs) != len(SHAPE_GEOMETRY[self.name]):
            raise ConfigurationError(
                f"shape {self.name} needs {len(SHAPE_GEOMETRY[self.name])} cells, got {len(locs)}"
            )
        if len(set(locs)) != len(locs):
            raise ConfigurationError(f"shape {self.name} has repeated cells {locs}")
        if any(not 0 <= c < BOARD_CELLS for c in locs):
            raise ConfigurationError(f"shape {self.name} has cells outside the board {locs}")
        if canonical_form(locs) != _CANONICAL[self.name]:
            raise ConfigurationError(f"cells {locs} do not form a {self.name} shape")

    @property
    def n(self) -> int:
        return len(self.locations)

    @property
    def table_size(self) -> int:
        return ALPHABET**self.n

    @classmethod
    def from_cells(cls, cells: Sequence[int], redundant: bool = False) -> "TupleShape":
        cells = tuple(int(c) for c in cells)
        return cls(shape_name_for(cells), cells, redundant)


def find_container(
    shape: TupleShape, candidates: Sequence[TupleShape]
) -> Tuple[int, int, Tuple[int, ...]]:
    """
    Locate a candidate whose cells contain the image of ``shape`` under some view.

    Returns ``(candidate index, view k, positions)`` where
    ``SYMMETRIES[k][shape.locations[j]] == candidates[i].locations[positions[j]]``.
    """
    for i, parent in enumerate(candidates):
        where = {cell: q for q, cell in enumerate(parent.locations)}
        for k in range(VIEWS):
            image = map_cells(shape.locations, k)
            if all(c in where for c in image):
                return i, k, tuple(where[c] for c in image)
    raise ConfigurationError(
        f"redundant tuple {shape.name}{shape.locations} is not contained in any retained tuple"
    )


class Architecture(Struct, frozen=True):
    name: str
    shapes: Tuple[TupleShape, ...]
    version: int = 1

    @property
    def m(self) -> int:
        return len(self.shapes)

    def parameter_count(self, stage_bits: int = 0) -> int:
        return (1 << stage_bits) * sum(s.table_size for s in self.shapes)


_BASE_4 = (
    TupleShape("42", _rc((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1))),
    TupleShape("42", _rc((1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1))),
    TupleShape("33", _rc((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))),
    TupleShape("33", _rc((1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2))),
)
_BASE_5 = _BASE_4 + (
    TupleShape("42", _rc((1, 0), (1, 1), (1, 2), (1, 3), (0, 0), (0, 1))),
)
_REDUNDANT_4_22 = (
    TupleShape("4", _rc((0, 0), (0, 1), (0, 2), (0, 3)), redundant=True),
    TupleShape("4", _rc((1, 0), (1, 1), (1, 2), (1, 3)), redundant=True),
    TupleShape("22", _rc((0, 0), (0, 1), (1, 0), (1, 1)), redundant=True),
    TupleShape("22", _rc((0, 1), (0, 2), (1, 1), (1, 2)), redundant=True),
    TupleShape("22", _rc((1, 1), (1, 2), (2, 1), (2, 2)), redundant=True),
)
_REDUNDANT_3 = (
    TupleShape("3", _rc((0, 0), (0, 1), (0, 2)), redundant=True),
    TupleShape("3", _rc((1, 0), (1, 1), (1, 2)), redundant=True),
)
# small networks from the straight-4 and square tuples alone, for quick runs
_SMALL_4_22 = tuple(TupleShape(s.name, s.locations) for s in _REDUNDANT_4_22)

ARCHITECTURES: Dict[str, Architecture] = {
    a.name: a
    for a in (
        Architecture("42-33", _BASE_4),
        Architecture("42-33-5", _BASE_5),
        Architecture("42-33-4-22", _BASE_5 + _REDUNDANT_4_22),
        Architecture("42-33-4-22-3", _BASE_5 + _REDUNDANT_4_22 + _REDUNDANT_3),
        Architecture("4-22", _SMALL_4_22),
        Architecture("4-22-3", _SMALL_4_22 + _REDUNDANT_3),
        Architecture(
            "421-43",
            (
                TupleShape("43", _rc((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2))),
                TupleShape("43", _rc((1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (2, 2))),
                TupleShape("43", _rc((1, 0), (1, 1), (1, 2), (1, 3), (0, 0), (0, 1), (0, 2))),
                TupleShape("421", _rc((0, 0), (0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (2, 0))),
                TupleShape("421", _rc((1, 0), (1, 1), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0))),
            ),
        ),
    )
}

DEFAULT_ARCHITECTURE = "42-33"


def get_architecture(name: str) -> Architecture:
    try:
        return ARCHITECTURES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown architecture {name!r}, choose one of {', '.join(ARCHITECTURES)}"
        )


def parameter_count(name: str, stage_bits: int = 0) -> int:
    """Number of weights of a registered architecture; nothing is allocated."""
    return get_architecture(name).parameter_count(stage_bits)


def list_architectures() -> List[str]:
    return list(ARCHITECTURES)
