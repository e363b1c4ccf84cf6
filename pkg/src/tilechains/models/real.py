"""Maximum entropy Gaussian grid for real-valued matrices in [0, 1].

Tiles constrain the expected sum (``total``) and expected sum of squares
(``total_sq``) of their covered cells. The maximum entropy distribution
factorizes per cell into N(-alpha/(2*beta), 1/(2*beta)) where alpha and
beta are sums of per-tile multipliers (lam_m, lam_v) over the covering
tiles. The multipliers maximize the dual log-likelihood

    L = -sum_cells [ 0.5*log(pi/beta) + alpha^2/(4*beta) ]
        - sum_tiles [ lam_m * total + lam_v * total_sq ]

subject to beta > 0 everywhere, solved by Polak-Ribiere conjugate gradient
(Jacobi-preconditioned; the raw dual is severely ill-conditioned on sparse
data) with a line search that rejects infeasible steps.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator

from ..tiles import Tile, check_tile_bounds

__all__ = [
    "RealMaxEnt",
    "DegenerateTargetError",
    "CoverageError",
    "dual_objective",
    "dual_gradient",
    "cell_params",
]

_DEGENERATE_RTOL = 1e-9


class DegenerateTargetError(ValueError):
    """Targets implying zero (or negative) variance on a tile."""


class CoverageError(ValueError):
    """Some matrix cell is covered by no tile, leaving beta undefined."""


class _DualProblem:
    """Incidence-matrix view of the dual: fast alpha/beta and tile sums."""

    def __init__(self, tiles: list[Tile], shape: tuple[int, int]):
        n, m = shape
        self.shape = shape
        self.n_tiles = len(tiles)
        self.targets_m = np.array([t.total for t in tiles])
        self.targets_v = np.array([t.total_sq for t in tiles])

        rows, cols = [], []
        for k, t in enumerate(tiles):
            flat = (t.row_index[:, None] * m + t.col_index[None, :]).ravel()
            rows.append(np.full(flat.size, k, dtype=np.intp))
            cols.append(flat)
        if tiles:
            indices = (np.concatenate(rows), np.concatenate(cols))
            data = np.ones(indices[0].size)
        else:
            indices = ([], [])
            data = []
        self.sums = sparse.csr_matrix(
            (data, indices), shape=(self.n_tiles, n * m)
        )  # tile sums of a cell grid
        self.spread = self.sums.T.tocsr()  # multiplier sums per cell
        coverage = np.asarray(self.sums.sum(axis=0)).ravel()
        if (coverage == 0).any():
            raise CoverageError(f"{int((coverage == 0).sum())} cells are covered by no tile")

    def split(self, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return lam[: self.n_tiles], lam[self.n_tiles :]

    def alpha_beta(self, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lam_m, lam_v = self.split(lam)
        return self.spread @ lam_m, self.spread @ lam_v

    def value(self, lam: np.ndarray) -> float:
        alpha, beta = self.alpha_beta(lam)
        if beta.size and beta.min() <= 0.0:
            return -math.inf
        lam_m, lam_v = self.split(lam)
        cell = 0.5 * np.log(np.pi / beta) + alpha**2 / (4.0 * beta)
        return float(
            -cell.sum() - (lam_m @ self.targets_m + lam_v @ self.targets_v)
        )

    def gradient(self, lam: np.ndarray) -> np.ndarray:
        alpha, beta = self.alpha_beta(lam)
        if beta.size and beta.min() <= 0.0:
            raise ValueError("gradient undefined at infeasible point (beta <= 0)")
        mean = -alpha / (2.0 * beta)
        second = 1.0 / (2.0 * beta) + alpha**2 / (4.0 * beta**2)
        return np.concatenate(
            [self.sums @ mean - self.targets_m, self.sums @ second - self.targets_v]
        )

    def precondition(self, lam: np.ndarray) -> np.ndarray:
        """Magnitudes of the dual Hessian diagonal (Jacobi scaling)."""
        alpha, beta = self.alpha_beta(lam)
        d_m = self.sums @ (1.0 / (2.0 * beta))
        d_v = self.sums @ (1.0 / (2.0 * beta**2) + alpha**2 / (2.0 * beta**3))
        diag = np.concatenate([d_m, d_v])
        return np.maximum(diag, 1e-12)


def _check_tiles(tiles: list[Tile], shape: tuple[int, int]) -> None:
    for t in tiles:
        check_tile_bounds(t, shape)
        if t.total is None or t.total_sq is None:
            raise ValueError("real model needs (total, total_sq) targets per tile")
        slack = t.total_sq - t.total**2 / t.n_cells
        if slack <= _DEGENERATE_RTOL * max(1.0, abs(t.total_sq)):
            raise DegenerateTargetError(
                f"tile rows={sorted(t.rows)} cols={sorted(t.cols)} has point-mass "
                f"targets (total={t.total:.6g}, total_sq={t.total_sq:.6g})"
            )


def cell_params(
    tiles: list[Tile],
    lam_m: np.ndarray,
    lam_v: np.ndarray,
    shape: tuple[int, int],
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell (alpha, beta) grids: multiplier sums over covering tiles."""
    alpha = np.zeros(shape)
    beta = np.zeros(shape)
    for t, m, v in zip(tiles, lam_m, lam_v):
        alpha[t.block] += m
        beta[t.block] += v
    return alpha, beta


def dual_objective(
    tiles: list[Tile],
    lam_m: np.ndarray,
    lam_v: np.ndarray,
    shape: tuple[int, int],
) -> float:
    """Dual log-likelihood; -inf signals an infeasible point (beta <= 0)."""
    problem = _DualProblem(list(tiles), shape)
    return problem.value(np.concatenate([np.asarray(lam_m, float), np.asarray(lam_v, float)]))


def dual_gradient(
    tiles: list[Tile],
    lam_m: np.ndarray,
    lam_v: np.ndarray,
    shape: tuple[int, int],
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the dual: expected minus target statistics per tile."""
    problem = _DualProblem(list(tiles), shape)
    g = problem.gradient(
        np.concatenate([np.asarray(lam_m, float), np.asarray(lam_v, float)])
    )
    return problem.split(g)


class RealMaxEnt(BaseEstimator):
    """Tile-constrained maximum entropy model for real-valued matrices.

    Parameters
    ----------
    tol : float
        Convergence threshold on the gradient infinity norm.
    max_iter : int
        Cap on conjugate gradient iterations.
    seed : int
        Seed for the multiplier initialization (lam_v in [0.5, 1.5],
        lam_m in [-0.1, 0.1], keeping every beta positive).

    Attributes
    ----------
    lambda_m_, lambda_v_ : ndarray aligned with ``tiles_``
    alpha_, beta_ : ndarray of shape (n_rows, n_cols)
    converged_ : bool
    n_iter_ : int
    grad_norm_ : float
    """

    def __init__(self, tol: float = 1e-6, max_iter: int = 5000, seed: int = 0):
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, tiles, shape, init=None):
        tiles = list(tiles)
        _check_tiles(tiles, shape)
        problem = _DualProblem(tiles, shape)
        k = len(tiles)

        if init is not None:
            lam_m = np.array(init[0], dtype=float)
            lam_v = np.array(init[1], dtype=float)
            if lam_m.shape != (k,) or lam_v.shape != (k,):
                raise ValueError("warm-start multipliers must match the tile list")
            lam = np.concatenate([lam_m, lam_v])
        else:
            lam = self._default_init(k)
        if not math.isfinite(problem.value(lam)):
            # A warm start may leave beta <= 0 somewhere; fall back to the
            # default feasible initialization instead of failing.
            lam = self._default_init(k)

        lam, info = _cg_maximize(problem, lam, tol=self.tol, max_iter=self.max_iter)

        self.tiles_ = tiles
        self.shape_ = tuple(shape)
        self.lambda_m_, self.lambda_v_ = (v.copy() for v in problem.split(lam))
        alpha, beta = problem.alpha_beta(lam)
        self.alpha_ = alpha.reshape(shape)
        self.beta_ = beta.reshape(shape)
        self.converged_ = info["converged"]
        self.n_iter_ = info["n_iter"]
        self.grad_norm_ = info["grad_norm"]
        return self

    def _default_init(self, k: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return np.concatenate(
            [rng.uniform(-0.1, 0.1, size=k), rng.uniform(0.5, 1.5, size=k)]
        )

    @property
    def means_(self) -> np.ndarray:
        return -self.alpha_ / (2.0 * self.beta_)

    @property
    def variances_(self) -> np.ndarray:
        return 1.0 / (2.0 * self.beta_)

    def mean(self, i: int, j: int) -> float:
        return float(self.means_[i, j])

    def variance(self, i: int, j: int) -> float:
        return float(self.variances_[i, j])

    def log_density(self, i: int, j: int, value: float) -> float:
        """Gaussian log-density at ``value``; may be positive (density > 1)."""
        mu = self.mean(i, j)
        var = self.variance(i, j)
        return -0.5 * math.log(2.0 * math.pi * var) - (value - mu) ** 2 / (2.0 * var)

    def expected_stats(self, tile: Tile) -> tuple[float, float]:
        """Model expectation of the tile's (total, total_sq) statistics."""
        check_tile_bounds(tile, self.shape_)
        mu = self.means_[tile.block]
        var = self.variances_[tile.block]
        return float(mu.sum()), float((mu**2 + var).sum())

    def log_partition(self) -> float:
        """Closed-form log of the density normalizer Z."""
        return float(
            (0.5 * np.log(np.pi / self.beta_) + self.alpha_**2 / (4.0 * self.beta_)).sum()
        )

    def dual_objective(self) -> float:
        return dual_objective(self.tiles_, self.lambda_m_, self.lambda_v_, self.shape_)

    def dual_gradient(self) -> tuple[np.ndarray, np.ndarray]:
        return dual_gradient(self.tiles_, self.lambda_m_, self.lambda_v_, self.shape_)

    def to_json(self) -> dict:
        n, m = self.shape_
        return {
            "kind": "real",
            "n_rows": n,
            "n_cols": m,
            "tiles": [t.to_json() for t in self.tiles_],
            "lambda_m": self.lambda_m_.tolist(),
            "lambda_v": self.lambda_v_.tolist(),
            "converged": bool(self.converged_),
            "n_iter": int(self.n_iter_),
            "grad_norm": float(self.grad_norm_),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RealMaxEnt":
        model = cls()
        model.shape_ = (int(obj["n_rows"]), int(obj["n_cols"]))
        model.tiles_ = [Tile.from_json(t) for t in obj["tiles"]]
        model.lambda_m_ = np.array(obj["lambda_m"], dtype=float)
        model.lambda_v_ = np.array(obj["lambda_v"], dtype=float)
        alpha, beta = cell_params(
            model.tiles_, model.lambda_m_, model.lambda_v_, model.shape_
        )
        model.alpha_, model.beta_ = alpha, beta
        model.converged_ = bool(obj["converged"])
        model.n_iter_ = int(obj["n_iter"])
        model.grad_norm_ = float(obj["grad_norm"])
        return model


def _cg_maximize(problem: _DualProblem, x0: np.ndarray, tol: float, max_iter: int):
    """Preconditioned Polak-Ribiere conjugate gradient ascent.

    Directions use the Jacobi-scaled gradient; restarts to (scaled) steepest
    ascent happen every ``len(x0)`` iterations and whenever the conjugate
    direction stops pointing uphill. Infeasible steps (beta <= 0, value
    -inf) are rejected inside the line search.
    """
    x = x0.copy()
    f = problem.value(x)
    g = problem.gradient(x)
    z = g / problem.precondition(x)
    d = z.copy()
    step = 1.0
    n_iter = 0
    converged = False
    since_restart = 0
    best_gnorm = math.inf
    stagnant = 0

    for n_iter in range(1, max_iter + 1):
        gnorm = float(np.abs(g).max())
        if gnorm <= tol:
            converged = True
            n_iter -= 1
            break
        if gnorm < 0.99 * best_gnorm:
            best_gnorm = gnorm
            stagnant = 0
        else:
            stagnant += 1
            if stagnant >= 100:
                break  # stuck (float precision or an unbounded dual); report honestly

        gd = float(g @ d)
        if gd <= 0.0 or since_restart >= x.size:
            d = z.copy()
            gd = float(g @ z)
            since_restart = 0

        new_step, f_new = _line_search(problem.value, x, d, f, gd, step)
        if new_step is None and since_restart > 0:
            d = z.copy()
            gd = float(g @ z)
            since_restart = 0
            new_step, f_new = _line_search(problem.value, x, d, f, gd, 1.0)
        if new_step is None:
            # Ascent became too small to verify by value differences; locate
            # the line maximum from the directional derivative instead.
            new_step = _derivative_step(problem, x, d, gd, step)
            if new_step is None:
                break
            f_new = problem.value(x + new_step * d)
            if not math.isfinite(f_new):
                break

        step = new_step
        x = x + step * d
        f = f_new
        g_new = problem.gradient(x)
        z_new = g_new / problem.precondition(x)
        pr = float(z_new @ (g_new - g)) / max(float(z @ g), 1e-300)
        d = z_new + max(0.0, pr) * d
        g, z = g_new, z_new
        since_restart += 1
        step = min(step * 2.0, 1e8)

    gnorm = float(np.abs(g).max())
    if gnorm <= tol:
        converged = True
    return x, {"converged": converged, "n_iter": n_iter, "grad_norm": gnorm}


def _derivative_step(problem, x, d, gd, step0):
    """Root of the directional derivative along a feasible ascent ray.

    The section is concave, so the derivative decreases; bracket its sign
    change by doubling and bisect. Used only when value-based search stalls
    at float precision, where the derivative still carries signal.
    """

    def feasible(s: float) -> bool:
        return math.isfinite(problem.value(x + s * d))

    def dphi(s: float) -> float:
        return float(problem.gradient(x + s * d) @ d)

    hi = step0
    for _ in range(60):
        if feasible(hi):
            break
        hi *= 0.25
    else:
        return None

    d_hi = dphi(hi)
    for _ in range(40):
        if d_hi <= 0.0:
            break
        grown = hi * 2.0
        if not feasible(grown):
            return hi
        hi = grown
        d_hi = dphi(hi)
    else:
        return hi

    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if dphi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * hi:
            break
    s = 0.5 * (lo + hi)
    if s <= 0.0 or float(np.abs(s * d).max()) < 1e-16 * (1.0 + float(np.abs(x).max())):
        return None
    return s if feasible(s) else None


def _line_search(value, x, d, f0, gd, step0):
    """Approximate maximizer of the concave section s -> value(x + s*d).

    Shrinks into the feasible region, then refines on the quadratic through
    (0, f0) with slope gd and the latest probe. Falls back to plain Armijo
    backtracking when interpolation finds no strict increase.
    """
    probes: dict[float, float] = {}

    def phi(s: float) -> float:
        if s not in probes:
            probes[s] = value(x + s * d)
        return probes[s]

    s = step0
    for _ in range(60):
        if math.isfinite(phi(s)):
            break
        s *= 0.25
    else:
        return None, f0

    for _ in range(3):
        fs = phi(s)
        curv = (fs - f0 - gd * s) / (s * s)
        if curv < 0.0:
            s_next = min(max(-gd / (2.0 * curv), 0.05 * s), 20.0 * s)
        else:
            s_next = 2.0 * s
        if abs(s_next - s) <= 1e-3 * s:
            break
        if math.isfinite(phi(s_next)) and phi(s_next) >= fs:
            s = s_next
        else:
            break

    feasible = [(fv, sv) for sv, fv in probes.items() if math.isfinite(fv) and fv > f0]
    if feasible:
        best_f, best_s = max(feasible)
        return best_s, best_f

    s = step0
    for _ in range(80):
        s *= 0.5
        f1 = phi(s)
        if math.isfinite(f1) and f1 >= f0 + 1e-4 * s * gd:
            return s, f1
    return None, f0
