"""Monitoring-area geometry: grid partition, perimeter link placement, distance queries.

The monitoring area is a rectangle partitioned into N uniform square cells of
width ``cell_width``. M transmitter/receiver pairs sit on the perimeter, each
node at the midpoint of a cell side, transmitters on the left+top half and
receivers on the right+bottom half, so every link segment crosses the area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


class NonDivisibleArea(ValueError):
    """Area dimensions are not an integer multiple of the cell width."""


class TooManyLinks(ValueError):
    """Not enough perimeter side midpoints for the requested link count."""


class IndexOutOfRange(IndexError):
    """Grid index outside [0, n_grids)."""


class DegenerateSegment(ValueError):
    """Segment endpoints coincide."""


@dataclass(frozen=True)
class Scenario:
    """Immutable description of the monitoring area and its links.

    ``ap_positions[m] -> dp_positions[m]`` is link m. Grid cells are indexed
    row-major from the minimum-coordinate corner.
    """

    area_width: float
    area_height: float
    cell_width: float
    n_grids: int
    n_links: int
    ap_positions: tuple[Point, ...]
    dp_positions: tuple[Point, ...]

    @property
    def n_cols(self) -> int:
        return round(self.area_width / self.cell_width)

    @property
    def n_rows(self) -> int:
        return round(self.area_height / self.cell_width)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.area_width, self.area_height)

    def link_segment(self, link: int) -> tuple[Point, Point]:
        return self.ap_positions[link], self.dp_positions[link]


def _exact_cells(length: float, cell_width: float) -> int:
    n = length / cell_width
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise NonDivisibleArea(
            f"dimension {length} is not a positive multiple of cell width {cell_width}"
        )
    return round(n)


def perimeter_midpoints(area_width: float, area_height: float, cell_width: float) -> list[Point]:
    """All grid-side midpoints on the perimeter, unordered convenience list."""
    nx = _exact_cells(area_width, cell_width)
    ny = _exact_cells(area_height, cell_width)
    w = cell_width
    pts: list[Point] = []
    for i in range(nx):
        pts.append(((i + 0.5) * w, 0.0))
        pts.append(((i + 0.5) * w, area_height))
    for j in range(ny):
        pts.append((0.0, (j + 0.5) * w))
        pts.append((area_width, (j + 0.5) * w))
    return pts


def build_scenario(
    area_width: float, area_height: float, cell_width: float, n_links: int
) -> Scenario:
    """Lay out the grid and place the M links across the area.

    Transmitter k walks the left side bottom-to-top then the top side
    left-to-right; receiver k walks the right side bottom-to-top then the
    bottom side left-to-right. Pairing the k-th entries yields horizontal
    segments for the side nodes and vertical segments for the top/bottom
    nodes, so all links cross the area.
    """
    nx = _exact_cells(area_width, cell_width)
    ny = _exact_cells(area_height, cell_width)
    if n_links < 1:
        raise TooManyLinks("n_links must be >= 1")
    if n_links > nx + ny:
        raise TooManyLinks(
            f"{n_links} links need {2 * n_links} perimeter nodes; "
            f"only {nx + ny} midpoints per half-perimeter are available"
        )
    w = cell_width
    ap_walk = [(0.0, (j + 0.5) * w) for j in range(ny)]
    ap_walk += [((i + 0.5) * w, area_height) for i in range(nx)]
    dp_walk = [(area_width, (j + 0.5) * w) for j in range(ny)]
    dp_walk += [((i + 0.5) * w, 0.0) for i in range(nx)]
    return Scenario(
        area_width=float(area_width),
        area_height=float(area_height),
        cell_width=float(cell_width),
        n_grids=nx * ny,
        n_links=n_links,
        ap_positions=tuple(ap_walk[:n_links]),
        dp_positions=tuple(dp_walk[:n_links]),
    )


def grid_center(s: Scenario, index: int) -> Point:
    """Center of cell ``index`` under row-major ordering from the min corner."""
    if not 0 <= index < s.n_grids:
        raise IndexOutOfRange(f"grid index {index} outside [0, {s.n_grids})")
    row, col = divmod(index, s.n_cols)
    return ((col + 0.5) * s.cell_width, (row + 0.5) * s.cell_width)


def point_to_segment_distance(p: Point, a: Point, b: Point) -> float:
    """Euclidean distance from p to the closed segment [a, b]."""
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        raise DegenerateSegment(f"segment endpoints coincide at {a}")
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))
