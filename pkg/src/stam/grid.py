"""Grid world: poses, occupancy grids, scalar fields and coordinate transforms.

Conventions used throughout the package:

* a cell is addressed as ``(col, row)``; ``col`` runs along world +x and
  ``row`` along world +y,
* numpy arrays backing grids and fields are indexed ``[row, col]`` with
  shape ``(height, width)``,
* the grid origin is the world position of the *corner* of cell (0, 0),
* angles are wrapped to the half-open interval (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import MapFormatError, OutOfBounds, RangeViolation

FREE_CHAR = "."
OCCUPIED_CHAR = "#"


def wrap_angle(a: float) -> float:
    """Wrap an angle in radians to (-pi, pi].

    Values already inside the interval are returned unchanged (bit-exact),
    which keeps repeated wrapping stable.
    """
    r = math.remainder(a, math.tau)
    # math.remainder returns values in [-pi, pi]; fold the open endpoint.
    return r + math.tau if r <= -math.pi else r


def wrap_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized angle wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=np.float64), math.tau)


@dataclass(frozen=True)
class Pose:
    """A planar pose <x, y, alpha> with alpha normalized to (-pi, pi]."""

    x: float
    y: float
    alpha: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "alpha", wrap_angle(float(self.alpha)))


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """A rectangular occupancy grid.

    ``occupied`` is a read-only bool array of shape (height, width); True
    marks an occupied cell.
    """

    width: int
    height: int
    resolution: float
    origin: Pose
    occupied: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if not (self.resolution > 0.0):
            raise ValueError("resolution must be positive")
        occ = np.array(self.occupied, dtype=bool)
        if occ.shape != (self.height, self.width):
            raise ValueError(
                f"occupancy shape {occ.shape} != (height={self.height}, width={self.width})"
            )
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return same_geometry(self, other) and bool(
            np.array_equal(self.occupied, other.occupied)
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A float-valued field over the same cell lattice as an OccupancyGrid."""

    width: int
    height: int
    resolution: float
    origin: Pose
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise ValueError(
                f"field shape {vals.shape} != (height={self.height}, width={self.width})"
            )
        if not np.isfinite(vals).all():
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarField):
            return NotImplemented
        return same_geometry(self, other) and bool(
            np.array_equal(self.values, other.values)
        )


def same_geometry(a: OccupancyGrid | ScalarField, b: OccupancyGrid | ScalarField) -> bool:
    """True when two grids/fields share size, resolution and origin exactly."""
    return (
        a.width == b.width
        and a.height == b.height
        and a.resolution == b.resolution
        and a.origin == b.origin
    )


def field_like(grid: OccupancyGrid | ScalarField, values: np.ndarray) -> ScalarField:
    """Build a ScalarField sharing ``grid``'s geometry."""
    return ScalarField(grid.width, grid.height, grid.resolution, grid.origin, values)


def in_bounds(grid: OccupancyGrid | ScalarField, cell: tuple[int, int]) -> bool:
    col, row = cell
    return 0 <= col < grid.width and 0 <= row < grid.height


def world_to_cell(point: tuple[float, float], grid: OccupancyGrid | ScalarField) -> tuple[int, int]:
    """Map a world point to the (col, row) of the cell containing it.

    Cell extents are half-open: a point on the shared edge of two cells
    belongs to the higher-index cell (floor arithmetic).
    """
    col = math.floor((point[0] - grid.origin.x) / grid.resolution)
    row = math.floor((point[1] - grid.origin.y) / grid.resolution)
    if not (0 <= col < grid.width and 0 <= row < grid.height):
        raise OutOfBounds(f"point {point} maps to cell {(col, row)} outside the grid")
    return (col, row)


def cell_to_world(cell: tuple[int, int], grid: OccupancyGrid | ScalarField) -> tuple[float, float]:
    """World coordinates of a cell's center."""
    col, row = cell
    if not in_bounds(grid, cell):
        raise OutOfBounds(f"cell {cell} outside {grid.width}x{grid.height} grid")
    x = grid.origin.x + (col + 0.5) * grid.resolution
    y = grid.origin.y + (row + 0.5) * grid.resolution
    return (x, y)


def cell_centers(grid: OccupancyGrid | ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """World coordinates of every cell center as (xs, ys) arrays of shape (H, W)."""
    cols = grid.origin.x + (np.arange(grid.width) + 0.5) * grid.resolution
    rows = grid.origin.y + (np.arange(grid.height) + 0.5) * grid.resolution
    xs, ys = np.meshgrid(cols, rows)
    return xs, ys


def obstacle_distances(grid: OccupancyGrid) -> np.ndarray:
    """Euclidean distance (meters) from each cell center to the nearest
    occupied cell center; +inf when the grid has no occupied cell."""
    if not grid.occupied.any():
        return np.full((grid.height, grid.width), np.inf)
    dist = ndimage.distance_transform_edt(~grid.occupied, sampling=grid.resolution)
    return np.asarray(dist, dtype=np.float64)


def normalize_costmap(grid: OccupancyGrid, inflation_radius: float) -> ScalarField:
    """Navigation cost in [0, 1]: occupied cells cost 1, free cells within
    ``inflation_radius`` of an obstacle decay linearly with distance, and
    everything farther away costs 0."""
    if inflation_radius < 0.0:
        raise RangeViolation(f"inflation_radius must be >= 0, got {inflation_radius}")
    values = np.zeros((grid.height, grid.width))
    values[grid.occupied] = 1.0
    if inflation_radius > 0.0 and grid.occupied.any():
        dist = obstacle_distances(grid)
        near = (~grid.occupied) & (dist <= inflation_radius)
        values[near] = 1.0 - dist[near] / inflation_radius
    return field_like(grid, values)


def format_map(grid: OccupancyGrid) -> str:
    """Serialize a grid to text: a header line `width height resolution
    origin_x origin_y origin_alpha`, then one row of `.`/`#` per grid row
    with row 0 printed last (so the text reads like a map, +y up)."""
    header = (
        f"{grid.width} {grid.height} {grid.resolution!r} "
        f"{grid.origin.x!r} {grid.origin.y!r} {grid.origin.alpha!r}"
    )
    lines = [header]
    for row in range(grid.height - 1, -1, -1):
        lines.append(
            "".join(OCCUPIED_CHAR if c else FREE_CHAR for c in grid.occupied[row])
        )
    return "\n".join(lines) + "\n"


def parse_map(text: str) -> OccupancyGrid:
    """Parse the text format produced by :func:`format_map`."""
    lines = text.splitlines()
    while lines and lines[-1].strip() == "":
        lines.pop()
    if not lines:
        raise MapFormatError("empty map text")
    tokens = lines[0].split()
    if len(tokens) != 6:
        raise MapFormatError(f"header must have 6 fields, got {len(tokens)}")
    try:
        width, height = int(tokens[0]), int(tokens[1])
        resolution = float(tokens[2])
        ox, oy, oalpha = float(tokens[3]), float(tokens[4]), float(tokens[5])
    except ValueError as e:
        raise MapFormatError(f"bad header: {e}") from e
    if width < 1 or height < 1 or not (resolution > 0.0):
        raise MapFormatError("header dimensions/resolution out of range")
    body = lines[1:]
    if len(body) != height:
        raise MapFormatError(f"expected {height} rows, got {len(body)}")
    occupied = np.zeros((height, width), dtype=bool)
    for i, line in enumerate(body):
        if len(line) != width:
            raise MapFormatError(f"row {i} has {len(line)} cells, expected {width}")
        bad = set(line) - {FREE_CHAR, OCCUPIED_CHAR}
        if bad:
            raise MapFormatError(f"row {i} has unknown cell characters {sorted(bad)}")
        # text row 0 is the top of the map, i.e. the highest grid row
        occupied[height - 1 - i] = [c == OCCUPIED_CHAR for c in line]
    return OccupancyGrid(width, height, resolution, Pose(ox, oy, oalpha), occupied)


def save_map(grid: OccupancyGrid, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_map(grid))


def load_map(path) -> OccupancyGrid:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_map(fh.read())


def bordered_room(
    width_m: float,
    height_m: float,
    resolution: float,
    origin: Pose = Pose(0.0, 0.0),
    pillars: int = 0,
    pillar_cells: int = 3,
    seed: int = 0,
) -> OccupancyGrid:
    """A rectangular room with occupied border walls and optional square
    pillars placed uniformly at random away from the walls."""
    width = max(3, int(round(width_m / resolution)))
    height = max(3, int(round(height_m / resolution)))
    occupied = np.zeros((height, width), dtype=bool)
    occupied[0, :] = occupied[-1, :] = True
    occupied[:, 0] = occupied[:, -1] = True
    if pillars > 0:
        rng = np.random.default_rng(seed)
        margin = 2 * pillar_cells
        for _ in range(pillars):
            if width - 2 * margin <= pillar_cells or height - 2 * margin <= pillar_cells:
                break
            col = int(rng.integers(margin, width - margin - pillar_cells))
            row = int(rng.integers(margin, height - margin - pillar_cells))
            occupied[row : row + pillar_cells, col : col + pillar_cells] = True
    return OccupancyGrid(width, height, resolution, origin, occupied)
