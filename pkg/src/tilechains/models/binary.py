"""Maximum entropy Bernoulli grid fit by iterative scaling.

Each matrix cell is an independent Bernoulli variable. Tiles constrain the
expected mean of their covered cells to a target frequency. Exact targets
(0 or 1) pin cells directly; noisy targets are matched by repeatedly
rescaling the odds of the covered cells by a per-tile factor x, where x
solves

    sum over covered cells of  x*p / (1 - (1 - x)*p)  =  n_cells * target.

The rescaled probability x*p / (1 - (1-x)*p) multiplies the cell's odds by
x, so pinned cells (p in {0, 1}) are invariant under every update.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator

from ..tiles import Tile, check_tile_bounds

__all__ = ["BinaryMaxEnt", "InconsistentTilesError", "solve_scaling_factor"]

_X_RTOL = 1e-10  # relative precision of the per-tile scaling factor


class InconsistentTilesError(ValueError):
    """Tile targets that no probability grid can satisfy."""


def _scaled(p: np.ndarray, x: float) -> np.ndarray:
    return x * p / (1.0 - (1.0 - x) * p)


def _solve_factor(p: np.ndarray, target_sum: float) -> float:
    """Root of g(x) = sum(x*p / (1-(1-x)*p)) - target_sum for 0 < p < 1.

    g is strictly increasing with range (0, len(p)), so the root is unique.
    Bracket by doubling, bisect until tight, then polish with Newton.
    """
    n_free = p.size
    if not (0.0 < target_sum < n_free):
        raise InconsistentTilesError(
            f"target sum {target_sum} outside attainable range (0, {n_free})"
        )

    def g(x: float) -> float:
        return float(_scaled(p, x).sum()) - target_sum

    lo, hi = 0.0, 1.0
    while g(hi) < 0.0:
        lo = hi
        hi *= 2.0
        if hi > 1e18:
            raise InconsistentTilesError("scaling factor diverged")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _X_RTOL * max(hi, 1.0):
            break

    # Newton polish: g'(x) = sum p(1-p) / (1-(1-x)p)^2 > 0.
    x = 0.5 * (lo + hi)
    for _ in range(20):
        denom = 1.0 - (1.0 - x) * p
        gx = float((x * p / denom).sum()) - target_sum
        dgx = float((p * (1.0 - p) / (denom * denom)).sum())
        if dgx <= 0.0:
            break
        step = gx / dgx
        x_new = x - step
        if x_new <= 0.0:
            x_new = 0.5 * x
        x = x_new
        if abs(step) <= _X_RTOL * max(x, 1.0):
            break
    return x


def solve_scaling_factor(tile: Tile, model: "BinaryMaxEnt", target: float) -> float:
    """Odds multiplier that moves the tile's expected frequency to ``target``.

    Cells pinned at 0/1 are held fixed and their contribution is subtracted
    from the target before solving over the free cells.
    """
    if not (0.0 < target < 1.0):
        raise ValueError("scaling is defined for noisy targets only")
    block = model.cell_prob_[tile.block]
    pinned = model.pinned_[tile.block]
    free = block[~pinned]
    pinned_sum = float(block[pinned].sum())
    target_sum = target * tile.n_cells - pinned_sum
    if free.size == 0:
        if math.isclose(pinned_sum, target * tile.n_cells, abs_tol=1e-12):
            return 1.0
        raise InconsistentTilesError(
            f"tile {sorted(tile.rows)}x{sorted(tile.cols)} is fully pinned at "
            f"frequency {pinned_sum / tile.n_cells:.6g}, target {target:.6g}"
        )
    return _solve_factor(free, target_sum)


class BinaryMaxEnt(BaseEstimator):
    """Tile-constrained maximum entropy model for binary matrices.

    Parameters
    ----------
    tol : float
        Convergence threshold on the largest per-tile frequency residual.
    max_sweeps : int
        Cap on full passes over the noisy tiles.

    Attributes
    ----------
    cell_prob_ : ndarray of shape (n_rows, n_cols)
        Per-cell probability of a 1. Uncovered cells stay at 1/2.
    pinned_ : ndarray of bool
        Cells fixed by exact tiles.
    converged_ : bool
    n_sweeps_ : int
    max_residual_ : float
    """

    def __init__(self, tol: float = 1e-6, max_sweeps: int = 1000):
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, tiles, shape, init=None):
        """Infer cell probabilities satisfying the tile frequency targets.

        ``init`` warm-starts the sweep from a previous model's grid; exact
        tiles are re-applied on top of it.
        """
        n, m = shape
        tiles = list(tiles)
        for t in tiles:
            check_tile_bounds(t, (n, m))
            if t.freq is None:
                raise ValueError("binary model needs a frequency target per tile")

        if init is not None:
            p = np.array(init, dtype=float)
            if p.shape != (n, m):
                raise ValueError("warm-start grid shape mismatch")
        else:
            p = np.full((n, m), 0.5)
        pinned = np.zeros((n, m), dtype=bool)
        pin_value = np.full((n, m), np.nan)
        owner = np.empty((n, m), dtype=object)

        exact = [t for t in tiles if t.is_exact]
        noisy = [t for t in tiles if not t.is_exact]
        for t in exact:
            block = pin_value[t.block]
            clash = ~np.isnan(block) & (block != t.freq)
            if clash.any():
                i, j = np.argwhere(clash)[0]
                other = owner[t.block][i, j]
                raise InconsistentTilesError(
                    f"exact tiles disagree: {self._describe(t)} and "
                    f"{self._describe(other)} overlap with targets "
                    f"{t.freq} vs {other.freq}"
                )
            pin_value[t.block] = t.freq
            owner[t.block] = t
            pinned[t.block] = True
            p[t.block] = t.freq

        self.shape_ = (n, m)
        self.tiles_ = tiles
        self.cell_prob_ = p
        self.pinned_ = pinned

        residual = 0.0
        sweeps = 0
        converged = True
        if noisy:
            converged = False
            for sweeps in range(1, self.max_sweeps + 1):
                for t in noisy:
                    self._apply_tile(t)
                residual = max(
                    abs(self.expected_frequency(t) - t.freq) for t in noisy
                )
                if residual <= self.tol:
                    converged = True
                    break

        self.converged_ = converged
        self.n_sweeps_ = sweeps
        self.max_residual_ = residual
        return self

    def _apply_tile(self, t: Tile) -> None:
        """One scaling update moving the tile's expected frequency onto target.

        When pinned cells already exhaust the target (or its complement),
        the remaining free cells have a boundary solution: they are set to
        0 (resp. 1) and frozen, the limit the scaling update approaches.
        """
        block = self.cell_prob_[t.block]
        pin = self.pinned_[t.block]
        free = ~pin
        n_free = int(free.sum())
        target_sum = t.freq * t.n_cells - float(block[pin].sum())
        if n_free == 0:
            if abs(target_sum) > 1e-9:
                raise InconsistentTilesError(
                    f"{self._describe(t)} is fully pinned away from target {t.freq}"
                )
            return
        if target_sum < -1e-9:
            raise InconsistentTilesError(
                f"{self._describe(t)} target {t.freq} is below its pinned mass"
            )
        if target_sum <= 1e-12:
            block = block.copy()
            block[free] = 0.0
            self.cell_prob_[t.block] = block
            self.pinned_[t.block] = True
            return
        if target_sum >= n_free - 1e-12:
            if target_sum > n_free + 1e-9:
                raise InconsistentTilesError(
                    f"{self._describe(t)} target {t.freq} exceeds attainable mass"
                )
            block = block.copy()
            block[free] = 1.0
            self.cell_prob_[t.block] = block
            self.pinned_[t.block] = True
            return
        x = _solve_factor(block[free], target_sum)
        block = block.copy()
        block[free] = _scaled(block[free], x)
        self.cell_prob_[t.block] = block

    @staticmethod
    def _describe(tile: Tile) -> str:
        return f"tile(rows={sorted(tile.rows)}, cols={sorted(tile.cols)})"

    def expected_frequency(self, tile: Tile) -> float:
        """Mean cell probability over the tile (expected tile frequency)."""
        check_tile_bounds(tile, self.shape_)
        return float(self.cell_prob_[tile.block].mean())

    def prob(self, i: int, j: int) -> float:
        return float(self.cell_prob_[i, j])

    def log_prob(self, i: int, j: int, value: int) -> float:
        """Log-probability of observing ``value`` at cell (i, j).

        A value contradicting a pinned cell yields -inf.
        """
        if value not in (0, 1):
            raise ValueError("binary cells take values 0 or 1")
        p = self.cell_prob_[i, j]
        q = p if value == 1 else 1.0 - p
        if q <= 0.0:
            return -math.inf
        return math.log(q)

    def to_json(self) -> dict:
        n, m = self.shape_
        overrides = {}
        rows, cols = np.nonzero(self.cell_prob_ != 0.5)
        for i, j in zip(rows.tolist(), cols.tolist()):
            overrides[f"{i},{j}"] = float(self.cell_prob_[i, j])
        return {
            "kind": "binary",
            "n_rows": n,
            "n_cols": m,
            "tiles": [t.to_json() for t in self.tiles_],
            "cell_prob": overrides,
            "converged": bool(self.converged_),
            "n_sweeps": int(self.n_sweeps_),
            "max_residual": float(self.max_residual_),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BinaryMaxEnt":
        model = cls()
        n, m = int(obj["n_rows"]), int(obj["n_cols"])
        model.shape_ = (n, m)
        model.tiles_ = [Tile.from_json(t) for t in obj["tiles"]]
        p = np.full((n, m), 0.5)
        for key, v in obj["cell_prob"].items():
            i, j = key.split(",")
            p[int(i), int(j)] = v
        model.cell_prob_ = p
        pinned = np.zeros((n, m), dtype=bool)
        for t in model.tiles_:
            if t.is_exact:
                pinned[t.block] = True
        model.pinned_ = pinned
        model.converged_ = bool(obj["converged"])
        model.n_sweeps_ = int(obj["n_sweeps"])
        model.max_residual_ = float(obj["max_residual"])
        return model
