"""Tiles: row-set x column-set rectangles carrying target statistics.

A tile constrains the maximum entropy models. In binary mode the target is
the mean of the covered cells (``freq``); in real mode the targets are the
sum and the sum of squares of the covered values (``total``, ``total_sq``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

from .data import TransactionMatrix

__all__ = [
    "Tile",
    "tile_frequency",
    "tile_stats",
    "check_tile_bounds",
    "dedup_tiles",
]


@dataclass(frozen=True, eq=True)
class Tile:
    rows: frozenset[int]
    cols: frozenset[int]
    freq: float | None = None
    total: float | None = None
    total_sq: float | None = None

    def __post_init__(self):
        if not self.rows or not self.cols:
            raise ValueError("tile needs nonempty rows and cols")
        if self.freq is not None and not (0.0 <= self.freq <= 1.0):
            raise ValueError(f"tile frequency target {self.freq} outside [0,1]")

    @cached_property
    def row_index(self) -> np.ndarray:
        return np.fromiter(sorted(self.rows), dtype=np.intp)

    @cached_property
    def col_index(self) -> np.ndarray:
        return np.fromiter(sorted(self.cols), dtype=np.intp)

    @property
    def n_cells(self) -> int:
        return len(self.rows) * len(self.cols)

    @property
    def block(self):
        """np.ix_ indexer selecting this tile's cells from a dense grid."""
        return np.ix_(self.row_index, self.col_index)

    @property
    def key(self) -> tuple[frozenset[int], frozenset[int]]:
        """Identity used for de-duplication: targets from one matrix agree."""
        return (self.rows, self.cols)

    def cells(self) -> Iterator[tuple[int, int]]:
        for i in sorted(self.rows):
            for j in sorted(self.cols):
                yield (i, j)

    @property
    def is_exact(self) -> bool:
        return self.freq is not None and self.freq in (0.0, 1.0)

    def with_binary_target(self, matrix: TransactionMatrix) -> "Tile":
        return Tile(self.rows, self.cols, freq=tile_frequency(self, matrix))

    def with_real_targets(self, matrix: TransactionMatrix) -> "Tile":
        total, total_sq = tile_stats(self, matrix)
        return Tile(self.rows, self.cols, total=total, total_sq=total_sq)

    def to_json(self) -> dict:
        obj: dict = {"rows": sorted(self.rows), "cols": sorted(self.cols)}
        if self.freq is not None:
            obj["freq"] = self.freq
        if self.total is not None:
            obj["total"] = self.total
            obj["total_sq"] = self.total_sq
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "Tile":
        return cls(
            frozenset(obj["rows"]),
            frozenset(obj["cols"]),
            freq=obj.get("freq"),
            total=obj.get("total"),
            total_sq=obj.get("total_sq"),
        )


def check_tile_bounds(tile: Tile, shape: tuple[int, int]) -> None:
    n, m = shape
    if min(tile.rows) < 0 or max(tile.rows) >= n:
        raise ValueError(f"tile rows outside matrix with {n} rows")
    if min(tile.cols) < 0 or max(tile.cols) >= m:
        raise ValueError(f"tile cols outside matrix with {m} cols")


def _covered_values(tile: Tile, matrix: TransactionMatrix) -> Iterator[float]:
    # Walk whichever index is smaller: the tile's cells or the nonzeros.
    if tile.n_cells <= len(matrix.values):
        get = matrix.values.get
        for cell in tile.cells():
            v = get(cell)
            if v is not None:
                yield v
    else:
        for (i, j), v in matrix.values.items():
            if i in tile.rows and j in tile.cols:
                yield v


def tile_frequency(tile: Tile, matrix: TransactionMatrix) -> float:
    """Mean of the covered cells: the fraction of ones for binary data."""
    check_tile_bounds(tile, matrix.shape)
    return sum(_covered_values(tile, matrix)) / tile.n_cells


def tile_stats(tile: Tile, matrix: TransactionMatrix) -> tuple[float, float]:
    """Sum and sum-of-squares of the covered cells."""
    check_tile_bounds(tile, matrix.shape)
    total = 0.0
    total_sq = 0.0
    for v in _covered_values(tile, matrix):
        total += v
        total_sq += v * v
    return total, total_sq


def dedup_tiles(tiles: Iterable[Tile]) -> list[Tile]:
    """Drop repeated (rows, cols) rectangles, keeping first occurrence."""
    seen = {}
    for t in tiles:
        if t.key not in seen:
            seen[t.key] = t
    return list(seen.values())
