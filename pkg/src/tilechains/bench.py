"""Synthetic matrix generation and inference/scoring runtime measurements.

Matrices have each cell nonzero independently with a density parameter;
all-zero rows and columns are patched with one random nonzero so margin
tiles stay informative. The harness times model inference (both families)
and tile-set evaluation (global vs local score) over a size/density grid,
averaging repetitions with a warm-up run excluded.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import TransactionMatrix
from .models.binary import BinaryMaxEnt
from .models.real import RealMaxEnt, _DEGENERATE_RTOL
from .scoring import (
    BackgroundTiles,
    PatternTiles,
    ScoringError,
    global_score,
    local_score,
)
from .tiles import Tile

__all__ = ["SynthSpec", "generate", "margin_tiles", "random_pattern", "run_benchmark"]

CSV_HEADER = [
    "mode",
    "N",
    "M",
    "beta",
    "phase",
    "mean_seconds",
    "std_seconds",
    "runs",
    "nonconverged",
]


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int
    n_cols: int
    density: float
    mode: str = "binary"
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.density < 1.0):
            raise ValueError("density must lie strictly between 0 and 1")
        if self.mode not in ("binary", "real"):
            raise ValueError(f"unknown mode {self.mode!r}")


def generate(spec: SynthSpec) -> TransactionMatrix:
    """Random matrix with the requested density; every row and column gets >= 1 nonzero."""
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_rows, spec.n_cols
    mask = rng.random((n, m)) < spec.density
    if spec.mode == "binary":
        dense = mask.astype(float)
    else:
        dense = np.where(mask, rng.random((n, m)), 0.0)

    def draw() -> float:
        return 1.0 if spec.mode == "binary" else float(rng.random())

    for i in np.flatnonzero(dense.sum(axis=1) == 0):
        dense[i, rng.integers(m)] = draw()
    for j in np.flatnonzero(dense.sum(axis=0) == 0):
        dense[rng.integers(n), j] = draw()

    values = {
        (int(i), int(j)): float(dense[i, j]) for i, j in zip(*np.nonzero(dense))
    }
    return TransactionMatrix(n, m, values, mode=spec.mode)


def margin_tiles(matrix: TransactionMatrix) -> list[Tile]:
    """Row and column margin tiles with targets read off the matrix."""
    dense = matrix.to_dense()
    n, m = matrix.shape
    all_rows = frozenset(range(n))
    all_cols = frozenset(range(m))
    tiles = []
    if matrix.mode == "binary":
        for i in range(n):
            tiles.append(Tile(frozenset([i]), all_cols, freq=float(dense[i].mean())))
        for j in range(m):
            tiles.append(Tile(all_rows, frozenset([j]), freq=float(dense[:, j].mean())))
    else:
        sq = dense**2
        for i in range(n):
            tiles.append(
                Tile(
                    frozenset([i]),
                    all_cols,
                    total=float(dense[i].sum()),
                    total_sq=float(sq[i].sum()),
                )
            )
        for j in range(m):
            tiles.append(
                Tile(
                    all_rows,
                    frozenset([j]),
                    total=float(dense[:, j].sum()),
                    total_sq=float(sq[:, j].sum()),
                )
            )
    return tiles


def random_pattern(
    matrix: TransactionMatrix,
    rng: np.random.Generator,
    count: int = 50,
    side: int = 5,
) -> PatternTiles:
    """Random square tiles with targets from the matrix.

    In real mode, tiles whose covered values are all identical carry
    point-mass targets the Gaussian family cannot represent; those are
    re-drawn (sparse matrices make all-zero rectangles common).
    """
    n, m = matrix.shape
    dense = matrix.to_dense()
    tiles: list[Tile] = []
    attempts = 0
    while len(tiles) < count and attempts < count * 200:
        attempts += 1
        r0 = int(rng.integers(0, max(n - side, 1)))
        c0 = int(rng.integers(0, max(m - side, 1)))
        rows = frozenset(range(r0, min(r0 + side, n)))
        cols = frozenset(range(c0, min(c0 + side, m)))
        block = dense[np.ix_(sorted(rows), sorted(cols))]
        if matrix.mode == "binary":
            tiles.append(Tile(rows, cols, freq=float(block.mean())))
        else:
            total = float(block.sum())
            total_sq = float((block**2).sum())
            slack = total_sq - total**2 / (len(rows) * len(cols))
            if slack <= _DEGENERATE_RTOL * max(1.0, abs(total_sq)):
                continue
            tiles.append(Tile(rows, cols, total=total, total_sq=total_sq))
    return PatternTiles("synthetic", tiles)


def _infer(matrix: TransactionMatrix, tiles: list[Tile], seed: int, tol_real: float):
    if matrix.mode == "binary":
        return BinaryMaxEnt().fit(tiles, matrix.shape)
    return RealMaxEnt(tol=tol_real, seed=seed).fit(tiles, matrix.shape)


def run_benchmark(
    sizes: list[int],
    betas: list[float],
    modes: tuple[str, ...] = ("binary", "real"),
    reps: int = 3,
    seed: int = 0,
    tol_real: float = 1e-4,
    eval_tiles: int = 50,
    out_csv: str | Path | None = None,
    progress=None,
) -> list[dict]:
    """Time inference and evaluation over the grid; one CSV row per phase.

    Each configuration runs one untimed warm-up followed by ``reps`` timed
    repetitions on fresh seeds. Runs whose model does not converge are
    counted and excluded from the mean/std.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows: list[dict] = []
    writer = None
    handle = None
    if out_csv is not None:
        handle = open(out_csv, "w", newline="")
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        handle.flush()

    def emit(mode, n, m, beta, phase, times, nonconverged):
        row = {
            "mode": mode,
            "N": n,
            "M": m,
            "beta": beta,
            "phase": phase,
            "mean_seconds": float(np.mean(times)) if times else math.nan,
            "std_seconds": float(np.std(times)) if times else math.nan,
            "runs": len(times),
            "nonconverged": nonconverged,
        }
        rows.append(row)
        if writer is not None:
            writer.writerow([row[k] for k in CSV_HEADER])
            handle.flush()
        if progress is not None:
            progress(row)

    try:
        for mode in modes:
            for size in sizes:
                for beta in betas:
                    infer_times = []
                    glob_times = []
                    loc_times = []
                    nonconv = 0
                    eval_skipped = 0
                    for rep in range(-1, reps):  # rep -1 is the warm-up
                        spec = SynthSpec(size, size, beta, mode, seed + max(rep, 0))
                        matrix = generate(spec)
                        tiles = margin_tiles(matrix)
                        t0 = time.perf_counter()
                        model = _infer(matrix, tiles, spec.seed, tol_real)
                        dt = time.perf_counter() - t0
                        if rep < 0:
                            continue
                        if not model.converged_:
                            nonconv += 1
                            continue
                        infer_times.append(dt)

                        background = BackgroundTiles(
                            col_tiles=tiles, row_tiles=[], dom_tiles=[]
                        )
                        pattern = random_pattern(
                            matrix, np.random.default_rng(spec.seed + 1), eval_tiles
                        )
                        t0 = time.perf_counter()
                        try:
                            global_score(pattern, background, model, matrix, seed=spec.seed)
                        except ScoringError:
                            eval_skipped += 1
                        else:
                            glob_times.append(time.perf_counter() - t0)
                        t0 = time.perf_counter()
                        local_score(pattern, model, matrix)
                        loc_times.append(time.perf_counter() - t0)

                    emit(mode, size, size, beta, "infer", infer_times, nonconv)
                    emit(mode, size, size, beta, "eval-global", glob_times, nonconv + eval_skipped)
                    emit(mode, size, size, beta, "eval-local", loc_times, nonconv)
    finally:
        if handle is not None:
            handle.close()
    return rows
