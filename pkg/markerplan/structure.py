"""
Structures to assemble: sets of slots on a grid of unit cells.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import FormatError, InvalidInputError

Column = Tuple[int, int]


@dataclass(frozen=True, order=True)
class Slot:
    """
    Destination of a block, in grid coordinates. Its position is
    (i, j, k) in structure units, i.e. (i, j, k) * unit_m in meters.
    """

    i: int
    j: int
    k: int

    @property
    def column(self) -> Column:
        return (self.i, self.j)

    @property
    def position(self) -> Tuple[float, float, float]:
        return (float(self.i), float(self.j), float(self.k))

    def to_list(self) -> List[int]:
        return [self.i, self.j, self.k]


class Structure:
    """
    A set of slots (unique), and the size (meters) of the unit cell.
    """

    def __init__(self, slots: Iterable[Slot], unit_m: float = 0.2) -> None:
        self._slots = tuple(sorted(slots))
        self._set = frozenset(self._slots)
        if len(self._set) != len(self._slots):
            raise InvalidInputError("structure slots must be unique")
        if not unit_m > 0.0:
            raise InvalidInputError(f"unit_m must be positive, got {unit_m}")
        self._unit_m = float(unit_m)

    @property
    def slots(self) -> Tuple[Slot, ...]:
        return self._slots

    @property
    def unit_m(self) -> float:
        return self._unit_m

    @property
    def base(self) -> int:
        """
        Height index of the foundation (lowest layer).
        """
        return min((s.k for s in self._slots), default=0)

    def __len__(self) -> int:
        return len(self._slots)

    def __contains__(self, slot: object) -> bool:
        return slot in self._set

    def columns(self) -> List[Column]:
        return sorted({s.column for s in self._slots})

    def positions(self) -> npt.NDArray[np.float64]:
        return np.array([s.position for s in self._slots], dtype=float).reshape(-1, 3)

    def to_dict(self) -> Dict[str, Any]:
        return {"unit_m": self._unit_m, "slots": [s.to_list() for s in self._slots]}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Structure":
        try:
            slots = []
            for entry in d["slots"]:
                if len(entry) != 3 or not all(
                    isinstance(v, int) and not isinstance(v, bool) for v in entry
                ):
                    raise ValueError(f"slot {entry} is not a list of 3 integers")
                slots.append(Slot(*entry))
            return cls(slots, float(d["unit_m"]))
        except (KeyError, TypeError, ValueError, InvalidInputError) as e:
            raise FormatError(f"invalid structure ({type(e).__name__}: {e})")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Structure":
        with open(path, "r") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"structure file {path} is not valid json: {e}")
        return cls.from_dict(d)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")


def flat_layer(nx: int, ny: int, unit_m: float = 0.2) -> Structure:
    """
    Single layer of nx x ny slots.
    """
    return block(nx, ny, 1, unit_m)


def block(nx: int, ny: int, levels: int, unit_m: float = 0.2) -> Structure:
    """
    'levels' stacked layers of nx x ny slots.
    """
    return Structure(
        (Slot(i, j, k) for i in range(nx) for j in range(ny) for k in range(levels)),
        unit_m,
    )


def pyramid(base: int, shrink: int = 1, unit_m: float = 0.2) -> Structure:
    """
    Stepped square pyramid: layer k has side base - shrink * k
    and is offset by (shrink * k) // 2 in both directions.
    A base of 17 gives 1785 slots.
    """
    if base < 1 or shrink < 1:
        raise InvalidInputError(f"invalid pyramid (base {base}, shrink {shrink})")
    slots = []
    k = 0
    while base - shrink * k > 0:
        side = base - shrink * k
        offset = (shrink * k) // 2
        slots.extend(
            Slot(offset + i, offset + j, k) for i in range(side) for j in range(side)
        )
        k += 1
    return Structure(slots, unit_m)
