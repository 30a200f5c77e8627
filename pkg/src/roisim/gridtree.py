"""Quadtree of uniform partitions: level l is the 2^l x 2^l grid of the space."""

from __future__ import annotations

from functools import lru_cache

from .model import Region
from .signature import GridPartition

DEFAULT_HEIGHT = 13


def node_id(level: int, cell: int) -> int:
    """Global id of a tree node; levels are numbered breadth-first."""
    return (4**level - 1) // 3 + cell


def node_of(nid: int) -> tuple[int, int]:
    level = 0
    while nid >= 4**level:
        nid -= 4**level
        level += 1
    return level, nid


def children(level: int, cell: int) -> list[tuple[int, int]]:
    side = 1 << level
    row, col = divmod(cell, side)
    side2 = side << 1
    out = []
    for dr in (0, 1):
        for dc in (0, 1):
            out.append((level + 1, (2 * row + dr) * side2 + 2 * col + dc))
    return out


def parent(level: int, cell: int) -> tuple[int, int]:
    if level == 0:
        raise ValueError("root has no parent")
    side = 1 << level
    row, col = divmod(cell, side)
    return level - 1, (row // 2) * (side >> 1) + col // 2


class GridTree:
    """Grid tree of a given height over a fixed space.

    Partitions at every level share edge coordinates with the levels above,
    so a node's four children tile it exactly.
    """

    def __init__(self, space: Region, height: int = DEFAULT_HEIGHT):
        if height < 0:
            raise ValueError("height must be non-negative")
        self.space = space
        self.height = height
        self._level = lru_cache(maxsize=None)(self._make_level)

    def _make_level(self, level: int) -> GridPartition:
        return GridPartition(self.space, 1 << level)

    def level(self, level: int) -> GridPartition:
        if not 0 <= level <= self.height:
            raise ValueError(f"level {level} outside [0, {self.height}]")
        return self._level(level)

    def region(self, level: int, cell: int) -> Region:
        return self.level(level).cell_region(cell)

    def is_leaf(self, level: int) -> bool:
        return level >= self.height
