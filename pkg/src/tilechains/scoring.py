"""Background tile construction and pattern quality scores.

The background model is constrained by column margins, per-domain row
margins, and whole-domain margins. Patterns (biclusters or chains) convert
to one tile per entity pair, covering the rows where the pair co-occurs.
Two scores measure how informative a pattern is against the background:

* global: KL divergence, summed per cell, between the model re-inferred
  with the pattern's tiles added and the background model;
* local: negative log-likelihood of the observed covered cells under the
  background model (no re-inference).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, EntityDomain, TransactionMatrix
from .mining import Bicluster
from .models.binary import BinaryMaxEnt
from .models.real import DegenerateTargetError, RealMaxEnt, _DEGENERATE_RTOL
from .tiles import Tile, dedup_tiles

__all__ = [
    "BackgroundTiles",
    "PatternTiles",
    "ScoringError",
    "build_background",
    "bicluster_to_tiles",
    "chain_to_tiles",
    "infer_background_model",
    "global_score",
    "local_score",
    "local_score_per_tile",
    "bernoulli_kl",
    "gaussian_kl",
    "score_report",
]


class ScoringError(RuntimeError):
    """Model inference failed while scoring a pattern."""

    def __init__(self, pattern_id: str, cause: Exception):
        self.pattern_id = pattern_id
        self.cause = cause
        super().__init__(f"scoring {pattern_id!r} failed: {cause}")


@dataclass
class BackgroundTiles:
    """Margin tiles: per column, per (row, domain), and per domain."""

    col_tiles: list[Tile]
    row_tiles: list[Tile]
    dom_tiles: list[Tile]
    dropped: list[Tile] = field(default_factory=list)

    def all(self) -> list[Tile]:
        return self.col_tiles + self.row_tiles + self.dom_tiles


@dataclass
class PatternTiles:
    """A pattern's tile set: one tile per entity pair of the pattern."""

    source: str
    tiles: list[Tile]


def _with_targets(tile: Tile, matrix: TransactionMatrix) -> Tile:
    if matrix.mode == "binary":
        return tile.with_binary_target(matrix)
    return tile.with_real_targets(matrix)


def _is_point_mass(tile: Tile) -> bool:
    slack = tile.total_sq - tile.total**2 / tile.n_cells
    return slack <= _DEGENERATE_RTOL * max(1.0, abs(tile.total_sq))


def build_background(
    matrix: TransactionMatrix, domains: list[EntityDomain]
) -> BackgroundTiles:
    """Margin tiles with targets read off the matrix.

    In real mode, tiles whose targets imply zero variance (all covered
    values identical) cannot be represented by the Gaussian model and are
    dropped; they are kept in ``dropped`` for inspection.
    """
    all_rows = frozenset(range(matrix.n_rows))
    col_tiles = []
    row_tiles = []
    dom_tiles = []
    for dom in domains:
        dom_cols = frozenset(dom.entity_ids)
        if not dom_cols:
            continue
        for e in dom.entity_ids:
            col_tiles.append(Tile(all_rows, frozenset([e])))
        for r in range(matrix.n_rows):
            row_tiles.append(Tile(frozenset([r]), dom_cols))
        dom_tiles.append(Tile(all_rows, dom_cols))

    background = BackgroundTiles(
        [_with_targets(t, matrix) for t in col_tiles],
        [_with_targets(t, matrix) for t in row_tiles],
        [_with_targets(t, matrix) for t in dom_tiles],
    )
    if matrix.mode == "real":
        for name in ("col_tiles", "row_tiles", "dom_tiles"):
            kept = []
            for t in getattr(background, name):
                if _is_point_mass(t):
                    background.dropped.append(t)
                else:
                    kept.append(t)
            setattr(background, name, kept)
    return background


def _rows_containing(matrix: TransactionMatrix, cols: tuple[int, int]) -> frozenset[int]:
    a, b = cols
    rows_a = {i for (i, j) in matrix.values if j == a}
    rows_b = {i for (i, j) in matrix.values if j == b}
    return frozenset(rows_a & rows_b)


def bicluster_to_tiles(b: Bicluster, matrix: TransactionMatrix) -> PatternTiles:
    """One tile per entity pair, over the rows containing both entities."""
    tiles = []
    for e in sorted(b.left):
        for f in sorted(b.right):
            rows = _rows_containing(matrix, (e, f))
            if not rows:
                warnings.warn(
                    f"pair ({e},{f}) of {b.id} never co-occurs; tile omitted",
                    stacklevel=2,
                )
                continue
            tiles.append(_with_targets(Tile(rows, frozenset((e, f))), matrix))
    return PatternTiles(b.id, tiles)


def chain_to_tiles(
    chain_id: str, members: list[Bicluster], matrix: TransactionMatrix
) -> PatternTiles:
    """Union of the member biclusters' tiles, de-duplicated by rectangle."""
    tiles = []
    for b in members:
        tiles.extend(bicluster_to_tiles(b, matrix).tiles)
    return PatternTiles(chain_id, dedup_tiles(tiles))


def infer_background_model(
    tiles: list[Tile],
    matrix: TransactionMatrix,
    seed: int = 0,
    init=None,
    tol: float | None = None,
):
    """Fit the mode-appropriate maximum entropy model over ``tiles``."""
    if matrix.mode == "binary":
        model = BinaryMaxEnt() if tol is None else BinaryMaxEnt(tol=tol)
        return model.fit(tiles, matrix.shape, init=init)
    model = RealMaxEnt(seed=seed) if tol is None else RealMaxEnt(tol=tol, seed=seed)
    return model.fit(tiles, matrix.shape, init=init)


def bernoulli_kl(q1: float, q2: float) -> float:
    """KL(Bernoulli(q1) || Bernoulli(q2)); inf when q2 pins the wrong value."""
    kl = 0.0
    if q1 > 0.0:
        if q2 <= 0.0:
            return math.inf
        kl += q1 * math.log(q1 / q2)
    if q1 < 1.0:
        if q2 >= 1.0:
            return math.inf
        kl += (1.0 - q1) * math.log((1.0 - q1) / (1.0 - q2))
    return max(kl, 0.0)


def gaussian_kl(mu1: float, var1: float, mu2: float, var2: float) -> float:
    """KL(N(mu1, var1) || N(mu2, var2))."""
    return (
        0.5 * math.log(var2 / var1)
        + (var1 + (mu1 - mu2) ** 2) / (2.0 * var2)
        - 0.5
    )


def _bernoulli_kl_grid(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ones = np.where(q1 > 0.0, q1 * (np.log(q1) - np.log(q2)), 0.0)
        zeros = np.where(
            q1 < 1.0, (1.0 - q1) * (np.log1p(-q1) - np.log1p(-q2)), 0.0
        )
    return np.maximum(ones + zeros, 0.0)


def _gaussian_kl_grid(
    mu1: np.ndarray, var1: np.ndarray, mu2: np.ndarray, var2: np.ndarray
) -> np.ndarray:
    return np.maximum(
        0.5 * np.log(var2 / var1) + (var1 + (mu1 - mu2) ** 2) / (2.0 * var2) - 0.5,
        0.0,
    )


def global_score(
    pattern: PatternTiles,
    background: BackgroundTiles,
    background_model,
    matrix: TransactionMatrix,
    seed: int = 0,
) -> float:
    """Per-cell KL divergence of the pattern-augmented model from background.

    The augmented model is re-inferred over the background tiles plus the
    pattern's tiles, warm-started from the background model.
    """
    tiles = dedup_tiles(background.all() + pattern.tiles)
    try:
        if matrix.mode == "binary":
            augmented = BinaryMaxEnt().fit(
                tiles, matrix.shape, init=background_model.cell_prob_
            )
            grid = _bernoulli_kl_grid(augmented.cell_prob_, background_model.cell_prob_)
        else:
            init = _warm_lambdas(tiles, background_model)
            augmented = RealMaxEnt(seed=seed).fit(tiles, matrix.shape, init=init)
            grid = _gaussian_kl_grid(
                augmented.means_,
                augmented.variances_,
                background_model.means_,
                background_model.variances_,
            )
    except (ValueError, DegenerateTargetError) as exc:
        raise ScoringError(pattern.source, exc) from exc
    return float(grid.sum())


def _warm_lambdas(tiles: list[Tile], fitted: RealMaxEnt):
    """Previous multipliers for shared tiles, zeros for new ones."""
    known = {
        t.key: (m, v)
        for t, m, v in zip(fitted.tiles_, fitted.lambda_m_, fitted.lambda_v_)
    }
    lam_m = np.array([known.get(t.key, (0.0, 0.0))[0] for t in tiles])
    lam_v = np.array([known.get(t.key, (0.0, 0.0))[1] for t in tiles])
    return lam_m, lam_v


def _cell_surprisal(model, matrix: TransactionMatrix, i: int, j: int) -> float:
    if matrix.mode == "binary":
        value = 1 if matrix.value(i, j) > 0 else 0
        return -model.log_prob(i, j, value)
    return -model.log_density(i, j, matrix.value(i, j))


def local_score(
    pattern: PatternTiles,
    background_model,
    matrix: TransactionMatrix,
    dedup_cells: bool = False,
) -> float:
    """Summed surprisal of the observed covered cells under the background.

    Cells covered by several pattern tiles count once per covering tile;
    ``dedup_cells`` switches to counting each distinct cell once. A binary
    cell contradicting a pinned background probability yields inf.
    """
    if dedup_cells:
        cells = {c for t in pattern.tiles for c in t.cells()}
        return sum(_cell_surprisal(background_model, matrix, i, j) for i, j in cells)
    return sum(contribution for _, contribution in local_score_per_tile(pattern, background_model, matrix))


def local_score_per_tile(
    pattern: PatternTiles, background_model, matrix: TransactionMatrix
) -> list[tuple[Tile, float]]:
    out = []
    for t in pattern.tiles:
        out.append(
            (
                t,
                sum(_cell_surprisal(background_model, matrix, i, j) for i, j in t.cells()),
            )
        )
    return out


def score_report(
    pattern_id: str,
    score_kind: str,
    mode: str,
    value: float,
    per_tile: list[tuple[Tile, float]] | None = None,
) -> dict:
    """JSON-ready score record; non-finite values serialize as strings."""

    def enc(v: float):
        return v if math.isfinite(v) else str(v)

    report = {
        "pattern_id": pattern_id,
        "score_kind": score_kind,
        "model": mode,
        "value": enc(value),
    }
    if per_tile is not None:
        report["per_tile"] = [
            {"rows": sorted(t.rows), "cols": sorted(t.cols), "value": enc(v)}
            for t, v in per_tile
        ]
    return report
