"""Gain-driven grid planning.

The gainmap fuses navigation cost with affordance likelihood:

    m = lambda * (1 - cost) + (1 - lambda) * likelihood

Goal selection picks a cell from the high-gain regions of that map and A*
plans an 8-connected path whose per-cell traversal cost is ``1 - m + eps``.
Cells with zero gain are never entered.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import (
    GeometryMismatch,
    NoAffordantRegion,
    OutOfBounds,
    RangeViolation,
    Unreachable,
)
from .grid import Pose, ScalarField, cell_to_world, field_like, in_bounds, same_geometry

# Additive cost epsilon: keeps every step strictly positive so A* still
# prefers short paths across plateaus of equal gain.
EPSILON = 1e-3

# Goal cells must clear this absolute affordance floor no matter the
# threshold; an all-but-zero map has no affordant region.
MIN_GAIN = 1e-6

_NEIGHBORS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


class GoalVariant(Enum):
    TOP_SCORE = "top_score"
    NEAREST_REGION = "nearest_region"
    LARGEST_REGION = "largest_region"


@dataclass(frozen=True)
class GoalStrategy:
    """How to pick a navigation goal from a gainmap.

    ``region_threshold`` (in (0, 1]) scales the map maximum: cells at or
    above ``threshold * max`` form the candidate regions.
    """

    variant: GoalVariant = GoalVariant.TOP_SCORE
    region_threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.region_threshold <= 1.0:
            raise RangeViolation(
                f"region_threshold must be in (0, 1], got {self.region_threshold}"
            )


@dataclass(frozen=True)
class Path:
    """An 8-connected cell path. ``total_gain`` sums the gainmap over the
    cells; ``cost`` sums the per-cell traversal cost (start included)."""

    cells: tuple[tuple[int, int], ...]
    total_gain: float
    cost: float


def gainmap(cost: ScalarField, likelihood: ScalarField, lam: float = 0.5) -> ScalarField:
    """Fuse a [0, 1] costmap and a [0, 1] likelihood field.

    lam = 1 reproduces 1 - cost and lam = 0 reproduces the likelihood,
    bit-exactly.
    """
    if not same_geometry(cost, likelihood):
        raise GeometryMismatch("cost and likelihood fields differ in geometry")
    if not 0.0 <= lam <= 1.0:
        raise RangeViolation(f"lambda must be in [0, 1], got {lam}")
    for name, f in (("cost", cost), ("likelihood", likelihood)):
        v = f.values
        if float(v.min()) < 0.0 or float(v.max()) > 1.0:
            raise RangeViolation(f"{name} values must lie in [0, 1]")
    values = lam * (1.0 - cost.values) + (1.0 - lam) * likelihood.values
    return field_like(cost, values)


def _regions(values: np.ndarray, threshold: float) -> tuple[np.ndarray, int, np.ndarray]:
    """8-connected components of cells scoring >= threshold * max (and above
    the absolute floor). Returns (labels, count, mask)."""
    peak = float(values.max())
    mask = (values >= threshold * peak) & (values > MIN_GAIN)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    return labels, count, mask


def select_goal(gain: ScalarField, robot: Pose, strategy: GoalStrategy) -> tuple[float, float]:
    """Pick a goal position (world coordinates of a cell center) from the
    gainmap's candidate regions.

    TOP_SCORE takes the global maximum cell (ties: smallest (row, col));
    NEAREST_REGION the region whose centroid is nearest the robot;
    LARGEST_REGION the region with the most cells (ties: higher mean gain).
    Region picks return the in-region cell center nearest the region
    centroid. Raises NoAffordantRegion when nothing clears the threshold.
    """
    values = gain.values
    labels, count, mask = _regions(values, strategy.region_threshold)
    if count == 0:
        raise NoAffordantRegion("no cell clears the affordance threshold")

    if strategy.variant is GoalVariant.TOP_SCORE:
        candidates = np.flatnonzero(mask.ravel())
        best = candidates[np.argmax(values.ravel()[candidates])]
        # argmax returns the first flat index, i.e. smallest (row, col)
        row, col = divmod(int(best), gain.width)
        return cell_to_world((col, row), gain)

    rows, cols = np.nonzero(mask)
    region_ids = labels[rows, cols]
    xs = gain.origin.x + (cols + 0.5) * gain.resolution
    ys = gain.origin.y + (rows + 0.5) * gain.resolution

    if strategy.variant is GoalVariant.NEAREST_REGION:
        best_region, best_key = None, None
        for rid in range(1, count + 1):
            sel = region_ids == rid
            cx, cy = float(xs[sel].mean()), float(ys[sel].mean())
            dist = math.hypot(cx - robot.x, cy - robot.y)
            if best_key is None or dist < best_key:
                best_key, best_region = dist, rid
    elif strategy.variant is GoalVariant.LARGEST_REGION:
        best_region, best_key = None, None
        for rid in range(1, count + 1):
            sel = region_ids == rid
            size = int(sel.sum())
            key = (size, float(values[rows[sel], cols[sel]].mean()))
            if best_key is None or key > best_key:
                best_key, best_region = key, rid
    else:
        raise ValueError(f"unknown goal variant {strategy.variant!r}")

    sel = region_ids == best_region
    cx, cy = float(xs[sel].mean()), float(ys[sel].mean())
    d2 = (xs[sel] - cx) ** 2 + (ys[sel] - cy) ** 2
    idx = int(np.argmin(d2))
    return (float(xs[sel][idx]), float(ys[sel][idx]))


def plan_path(gain: ScalarField, start: tuple[int, int], goal: tuple[int, int],
              epsilon: float = EPSILON) -> Path:
    """A* over the gainmap's cells.

    Per-cell traversal cost is ``1 - gain + epsilon``; a step pays the cost
    of the cell it enters and the start cell's own cost counts once. Cells
    with zero gain are impassable. The heuristic ``epsilon * chebyshev`` is
    admissible (every step costs at least epsilon), so returned paths are
    cost-optimal. Ties in the open set break on (f, h, row, col) to keep
    expansion order deterministic.
    """
    for name, cell in (("start", start), ("goal", goal)):
        if not in_bounds(gain, cell):
            raise OutOfBounds(f"{name} cell {cell} outside the grid")
    values = gain.values
    cost = 1.0 - values + epsilon

    def blocked(col: int, row: int) -> bool:
        return values[row, col] <= 0.0

    sc, sr = start
    gc, gr = goal
    if blocked(sc, sr) or blocked(gc, gr):
        raise Unreachable(f"start {start} or goal {goal} has zero gain")
    if start == goal:
        return Path((start,), float(values[sr, sc]), float(cost[sr, sc]))

    def h(col: int, row: int) -> float:
        return epsilon * max(abs(col - gc), abs(row - gr))

    g = np.full((gain.height, gain.width), np.inf)
    g[sr, sc] = cost[sr, sc]
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    closed = np.zeros((gain.height, gain.width), dtype=bool)
    h0 = h(sc, sr)
    heap: list[tuple[float, float, int, int]] = [(g[sr, sc] + h0, h0, sr, sc)]
    while heap:
        f, _, row, col = heapq.heappop(heap)
        if closed[row, col]:
            continue
        closed[row, col] = True
        if (col, row) == goal:
            cells = [(col, row)]
            while cells[-1] != start:
                cells.append(parent[cells[-1]])
            cells.reverse()
            total_gain = float(sum(values[r, c] for c, r in cells))
            return Path(tuple(cells), total_gain, float(g[row, col]))
        for dc, dr in _NEIGHBORS:
            ncol, nrow = col + dc, row + dr
            if not (0 <= ncol < gain.width and 0 <= nrow < gain.height):
                continue
            if closed[nrow, ncol] or blocked(ncol, nrow):
                continue
            cand = g[row, col] + cost[nrow, ncol]
            if cand < g[nrow, ncol]:
                g[nrow, ncol] = cand
                parent[(ncol, nrow)] = (col, row)
                hn = h(ncol, nrow)
                heapq.heappush(heap, (cand + hn, hn, nrow, ncol))
    raise Unreachable(f"no path from {start} to {goal}")
