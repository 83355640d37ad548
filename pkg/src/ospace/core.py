"""Scene geometry and the grid convention shared by every other module.

The room floor is a ``rows x cols`` grid of square cells (default 10 x 12
cells of 0.5 m, i.e. a 5 m x 6 m, 30 m^2 room).  Coordinates are metric:
origin in a room corner, x rightward along the columns, y upward along the
rows, yaw in degrees counterclockwise from the +x axis.  Grid arrays are
indexed ``(row, col)`` with row varying along y, and flatten row-major.

Positions are accepted on the closed room rectangle: mirroring maps the 0
edge onto the far wall, so the boundary must be valid on both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RoomSpec",
    "DEFAULT_SPEC",
    "Point2",
    "Person",
    "Scene",
    "OSpaceMap",
    "cell_center",
    "point_to_cell",
    "grid_centers",
    "canonical_partition",
    "non_singleton_blocks",
    "validate_positions",
]


@dataclass(frozen=True)
class RoomSpec:
    """Grid geometry of the room: ``rows x cols`` cells of ``cell_m`` meters."""

    rows: int = 10
    cols: int = 12
    cell_m: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not (math.isfinite(self.cell_m) and self.cell_m > 0):
            raise ValueError(f"cell size must be positive, got {self.cell_m}")

    @property
    def width_m(self) -> float:
        return self.cols * self.cell_m

    @property
    def height_m(self) -> float:
        return self.rows * self.cell_m

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols


DEFAULT_SPEC = RoomSpec()


@dataclass(frozen=True)
class Point2:
    """A point on the floor, in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Person:
    """Position in meters plus yaw in degrees, normalized to [0, 360)."""

    x: float
    y: float
    yaw_deg: float

    def __post_init__(self):
        for name in ("x", "y", "yaw_deg"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite {name}: {v}")
            object.__setattr__(self, name, float(v))
        object.__setattr__(self, "yaw_deg", self.yaw_deg % 360.0)


@dataclass(frozen=True)
class Scene:
    """One annotated frame: people plus a full partition into groups.

    ``groups`` must cover every person index exactly once; singletons are
    their own one-person blocks.
    """

    frame_id: str
    persons: tuple[Person, ...]
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "groups", tuple(tuple(b) for b in self.groups))
        seen: set[int] = set()
        for block in self.groups:
            if not block:
                raise ValueError("empty group block")
            for idx in block:
                if not isinstance(idx, int) or isinstance(idx, bool):
                    raise ValueError(f"group member {idx!r} is not an int index")
                if not 0 <= idx < len(self.persons):
                    raise ValueError(f"person index {idx} out of range")
                if idx in seen:
                    raise ValueError(f"person {idx} appears in more than one group")
                seen.add(idx)
        if len(seen) != len(self.persons):
            missing = sorted(set(range(len(self.persons))) - seen)
            raise ValueError(f"groups do not cover persons {missing}")


@dataclass(frozen=True, eq=False)
class OSpaceMap:
    """Grid of o-space likelihoods in [0, 1] over the room cells."""

    values: np.ndarray
    spec: RoomSpec = DEFAULT_SPEC

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.shape != (self.spec.rows, self.spec.cols):
            raise ValueError(
                f"map shape {arr.shape} does not match grid "
                f"{self.spec.rows}x{self.spec.cols}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("map contains non-finite values")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("map values must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def flatten(self) -> np.ndarray:
        """Row-major flattening (120 values for the default grid)."""
        return self.values.reshape(-1)


def cell_center(row: int, col: int, spec: RoomSpec = DEFAULT_SPEC) -> Point2:
    """Metric center of grid cell (row, col)."""
    if not (0 <= row < spec.rows and 0 <= col < spec.cols):
        raise ValueError(
            f"cell ({row}, {col}) outside {spec.rows}x{spec.cols} grid"
        )
    return Point2((col + 0.5) * spec.cell_m, (row + 0.5) * spec.cell_m)


def point_to_cell(p: Point2, spec: RoomSpec = DEFAULT_SPEC) -> tuple[int, int]:
    """Grid cell containing ``p``; the far boundary clamps into the last cell."""
    if not (0.0 <= p.x <= spec.width_m and 0.0 <= p.y <= spec.height_m):
        raise ValueError(
            f"point ({p.x}, {p.y}) outside room "
            f"{spec.width_m} m x {spec.height_m} m"
        )
    col = min(int(p.x // spec.cell_m), spec.cols - 1)
    row = min(int(p.y // spec.cell_m), spec.rows - 1)
    return row, col


def grid_centers(spec: RoomSpec = DEFAULT_SPEC) -> tuple[np.ndarray, np.ndarray]:
    """Cell-center coordinates: (xs of shape (cols,), ys of shape (rows,))."""
    xs = (np.arange(spec.cols) + 0.5) * spec.cell_m
    ys = (np.arange(spec.rows) + 0.5) * spec.cell_m
    return xs, ys


def canonical_partition(groups) -> tuple[tuple[int, ...], ...]:
    """Order-free form of a partition: sorted blocks of sorted members."""
    return tuple(sorted(tuple(sorted(b)) for b in groups))


def non_singleton_blocks(scene: Scene) -> tuple[tuple[int, ...], ...]:
    """The conversational groups of a scene (blocks with two or more people)."""
    return tuple(b for b in scene.groups if len(b) >= 2)


def validate_positions(scene: Scene, spec: RoomSpec = DEFAULT_SPEC) -> None:
    """Raise if any person lies outside the (closed) room rectangle."""
    for i, p in enumerate(scene.persons):
        if not (0.0 <= p.x <= spec.width_m and 0.0 <= p.y <= spec.height_m):
            raise ValueError(
                f"person {i} at ({p.x}, {p.y}) outside room "
                f"{spec.width_m} m x {spec.height_m} m"
            )
