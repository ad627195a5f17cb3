"""Subordination fixed point for sums of matrices free over the diagonal.

For ``Lambda`` in D+ the subordination function ``Omega`` solves
``Omega = H_Y(H_X(Omega) + Lambda) + Lambda`` and the diagonal Stieltjes
transform of the sum is ``G_X(Omega)``. The spectral density at ``x`` is
read from ``Lambda = (x + iy) I``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .kernel import as_upper_diagonal, h_transform, stieltjes_diag

log = logging.getLogger(__name__)


class SubordinationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    y: float = 0.001
    tol: float = 0.001
    max_iter: int = 20000
    damping: float = 1.0

    def __post_init__(self):
        if self.y <= 0:
            raise ValueError("y must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class OmegaResult:
    omega: np.ndarray
    g: np.ndarray
    """``G_X(omega)``, the diagonal transform of the sum."""
    iterations: int
    converged: bool
    residual: float
    min_imag: float
    """Smallest imaginary part over all accepted iterates."""


def _iterate(transform_x: Callable, transform_y: Callable, lam, omega, cfg: SolverConfig) -> OmegaResult:
    """Shared damped iteration; ``transform_*`` map a point to its Stieltjes transform."""
    damping = cfg.damping
    halved = False
    best = None
    min_imag = float(np.min(omega.imag))
    for it in range(1, cfg.max_iter + 1):
        gx = transform_x(omega)
        w = 1.0 / gx - omega + lam
        f = 1.0 / transform_y(w) - w + lam
        residual = float(np.max(np.abs(f - omega)))
        if best is None or residual < best.residual:
            best = OmegaResult(omega, gx, it, False, residual, min_imag)
        if residual <= cfg.tol:
            return OmegaResult(omega, gx, it, True, residual, min_imag)
        new = omega + damping * (f - omega)
        if not np.all(new.imag > 0):
            if halved:
                raise SubordinationError(f"iterate left D+ at step {it} even after halving the damping")
            halved = True
            damping /= 2
            log.warning("iterate left D+ at step %d; damping halved to %g", it, damping)
            new = omega + damping * (f - omega)
            if not np.all(new.imag > 0):
                raise SubordinationError(f"iterate left D+ at step {it}")
        omega = new
        min_imag = min(min_imag, float(np.min(omega.imag)))
    best.iterations = cfg.max_iter
    best.min_imag = min_imag
    return best


def fixed_point_omega(X, Y, lam, cfg: SolverConfig = SolverConfig(), omega0=None) -> OmegaResult:
    """Solve for the subordination function at ``lam``, starting from ``omega0`` (default ``lam``).

    Stops once ``||F(Omega_n) - Omega_n||_inf <= tol`` and returns ``Omega_n``
    together with ``G_X(Omega_n)``. With ``damping=1`` this is the plain
    iteration and the stopping rule reads ``||Omega_(n+1) - Omega_n|| <= tol``.
    A non-converged result carries the iterate of smallest residual.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"X and Y differ in shape: {X.shape} vs {Y.shape}")
    n = X.shape[0]
    lam = as_upper_diagonal(lam, n)
    omega = lam.copy() if omega0 is None else as_upper_diagonal(omega0, n).copy()
    return _iterate(lambda om: stieltjes_diag(X, om), lambda w: stieltjes_diag(Y, w), lam, omega, cfg)


def subordination_map(X, Y, lam, omega):
    """``F_Lambda(omega)``; exposed for residual checks."""
    w = h_transform(X, omega) + lam
    return h_transform(Y, w) + lam


@dataclass
class DensityCurve:
    grid: np.ndarray
    values: np.ndarray
    iterations: list[int] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    results: list = field(default_factory=list, repr=False)
    """Per-point solver results (not serialized)."""

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if self.grid.size > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def nonconverged_fraction(self) -> float:
        if not self.converged:
            return 0.0
        return 1.0 - sum(self.converged) / len(self.converged)

    def mass(self) -> float:
        """Trapezoid integral over the converged points."""
        ok = np.isfinite(self.values)
        return float(np.trapezoid(self.values[ok], self.grid[ok]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "density"])
            for x, v in zip(self.grid, self.values):
                writer.writerow([repr(float(x)), repr(float(v))])

    def to_record(self) -> dict:
        return {
            "meta": self.meta,
            "grid": [float(x) for x in self.grid],
            "density": [None if not math.isfinite(v) else float(v) for v in self.values],
            "iterations": list(self.iterations),
            "converged": list(self.converged),
        }

    def write_record(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_record(), fh, indent=2, sort_keys=True)


def _chunks(n: int, k: int) -> list[range]:
    k = max(1, min(k, n))
    bounds = np.linspace(0, n, k + 1).round().astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def _sweep(points, solve, chunks: int, workers: int):
    """Run ``solve(point, warm)`` over contiguous chunks, warm-starting within each chunk."""

    def run(chunk):
        warm = None
        out = []
        for i in chunk:
            res = solve(points[i], warm)
            out.append(res)
            if res.converged:
                warm = res.omega
        return out

    parts = _chunks(len(points), chunks)
    if workers > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, parts))
    else:
        results = [run(c) for c in parts]
    return [r for part in results for r in part]


def amalgamated_density(
    X,
    Y,
    grid,
    cfg: SolverConfig = SolverConfig(),
    scale: float = 1.0,
    warm_start: bool = True,
    chunks: int = 1,
    workers: int = 1,
) -> DensityCurve:
    """Density of ``(X + Y) / scale`` for X, Y free over the diagonal, on ``grid``.

    Each point uses ``Lambda = (scale * x + iy) I`` and the value
    ``scale / pi * |Im mean(G_X(Omega))|``. Points whose iteration does not
    converge get NaN.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    n = X.shape[0]
    grid = np.asarray(grid, dtype=float)

    def solve(x, warm):
        lam = np.full(n, complex(scale * x, cfg.y))
        return fixed_point_omega(X, Y, lam, cfg, omega0=warm if warm_start else None)

    results = _sweep(grid, solve, chunks, workers)
    values = np.array([scale * abs(r.g.mean().imag) / math.pi if r.converged else math.nan for r in results])
    return DensityCurve(
        grid,
        values,
        [r.iterations for r in results],
        [r.converged for r in results],
        {"solver": asdict(cfg), "method": "amalgamated", "N": n, "scale": scale, "chunks": chunks},
        results,
    )


@dataclass
class _ScalarResult:
    omega: complex
    g: complex
    iterations: int
    converged: bool


def scalar_free_density(
    eigs_x,
    eigs_y,
    grid,
    cfg: SolverConfig = SolverConfig(),
    scale: float = 1.0,
    warm_start: bool = True,
) -> DensityCurve:
    """Density of the free convolution of two empirical spectra, scaled as in :func:`amalgamated_density`."""
    ex = np.asarray(eigs_x, dtype=float)
    ey = np.asarray(eigs_y, dtype=float)
    if ex.size == 0 or ey.size == 0:
        raise ValueError("eigenvalue lists must be nonempty")
    grid = np.asarray(grid, dtype=float)

    def gx(w):
        return np.array([np.mean(1.0 / (w[0] - ex))])

    def gy(w):
        return np.array([np.mean(1.0 / (w[0] - ey))])

    def solve(x, warm):
        z = np.array([complex(scale * x, cfg.y)])
        start = z.copy() if warm is None or not warm_start else np.array([warm])
        r = _iterate(gx, gy, z, start, cfg)
        return _ScalarResult(complex(r.omega[0]), complex(r.g[0]), r.iterations, r.converged)

    results = _sweep(grid, solve, 1, 1)
    values = np.array([scale * abs(r.g.imag) / math.pi if r.converged else math.nan for r in results])
    return DensityCurve(
        grid,
        values,
        [r.iterations for r in results],
        [r.converged for r in results],
        {"solver": asdict(cfg), "method": "scalar", "N": int(ex.size), "scale": scale},
        results,
    )
