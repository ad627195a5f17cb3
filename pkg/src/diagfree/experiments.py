"""The three-curve density experiment: eigenvalue histogram, amalgamated curve, scalar free curve."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .kernel import hermitian_eigenvalues
from .models import ModelSpec, rng_for
from .subordination import DensityCurve, SolverConfig, amalgamated_density, scalar_free_density

SEED_ENV = "DIAGFREE_SEED"
DEFAULT_GRID = (-3.2, 3.2, 0.02)
MAX_NONCONVERGED = 0.1


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


def make_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if not step > 0 or not hi > lo:
        raise ValueError(f"malformed grid {lo}:{hi}:{step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def parse_grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must read min:max:step, got {text!r}")
    lo, hi, step = (float(p) for p in parts)
    make_grid(lo, hi, step)
    return lo, hi, step


@dataclass(frozen=True)
class DensityManifest:
    X: ModelSpec
    Y: ModelSpec
    N: int
    seed: int = 0
    grid: tuple[float, float, float] = DEFAULT_GRID
    solver: SolverConfig = SolverConfig()
    name: str = "density"
    out: str = "."
    max_nonconverged: float = MAX_NONCONVERGED
    chunks: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        self.X.check_size(self.N)
        self.Y.check_size(self.N)
        make_grid(*self.grid)

    @classmethod
    def from_mapping(cls, values: dict) -> "DensityManifest":
        """Build from string-valued ``key=value`` pairs (``X``, ``Y``, ``N``, ``grid``, ``y``, ``tol``, ...)."""
        values = dict(values)
        values.pop("command", None)
        unknown = set(values) - {
            "X", "Y", "N", "seed", "grid", "y", "tol", "max_iter", "damping", "name", "out",
            "max_nonconverged", "chunks", "workers",
        }
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        for key in ("X", "Y", "N"):
            if key not in values:
                raise ValueError(f"manifest is missing {key}")
        solver = SolverConfig(
            y=float(values.get("y", SolverConfig.y)),
            tol=float(values.get("tol", SolverConfig.tol)),
            max_iter=int(values.get("max_iter", SolverConfig.max_iter)),
            damping=float(values.get("damping", SolverConfig.damping)),
        )
        grid = values.get("grid", DEFAULT_GRID)
        return cls(
            X=values["X"] if isinstance(values["X"], ModelSpec) else ModelSpec.parse(str(values["X"])),
            Y=values["Y"] if isinstance(values["Y"], ModelSpec) else ModelSpec.parse(str(values["Y"])),
            N=int(values["N"]),
            seed=int(values["seed"]) if "seed" in values else default_seed(),
            grid=parse_grid(grid) if isinstance(grid, str) else tuple(float(g) for g in grid),
            solver=solver,
            name=str(values.get("name", "density")),
            out=str(values.get("out", ".")),
            max_nonconverged=float(values.get("max_nonconverged", MAX_NONCONVERGED)),
            chunks=int(values.get("chunks", 1)),
            workers=int(values.get("workers", 1)),
        )

    def to_record(self) -> dict:
        return {
            "X": str(self.X),
            "Y": str(self.Y),
            "N": self.N,
            "seed": self.seed,
            "grid": list(self.grid),
            "solver": asdict(self.solver),
            "name": self.name,
            "max_nonconverged": self.max_nonconverged,
            "chunks": self.chunks,
        }


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def window_histogram(eigs, grid, step: float) -> np.ndarray:
    """Density estimate at each grid point from the eigenvalues in ``[x - step, x + step)``.

    Windows have width ``2 * step``; when the spectrum lies inside the grid
    every eigenvalue falls in exactly two windows, so ``sum(hist) * step == 1``.
    """
    e = np.sort(np.asarray(eigs, dtype=float))
    counts = np.searchsorted(e, grid + step, side="left") - np.searchsorted(e, grid - step, side="left")
    return counts / (e.size * 2.0 * step)


def l1_distance(grid, a, b, step: float) -> float:
    """Riemann-sum L1 distance over the grid points where both curves are finite."""
    a = np.asarray(a)
    b = np.asarray(b)
    ok = np.isfinite(a) & np.isfinite(b)
    return float(np.sum(np.abs(a[ok] - b[ok])) * step)


@dataclass
class DensityRun:
    manifest: DensityManifest
    grid: np.ndarray
    hist: np.ndarray
    amalg: DensityCurve
    scalar: DensityCurve
    record: dict = field(default_factory=dict)

    @property
    def l1_amalg(self) -> float:
        return self.record["l1"]["hist_amalg"]

    @property
    def l1_scalar(self) -> float:
        return self.record["l1"]["hist_scalar"]

    def write(self, out: str | None = None, name: str | None = None) -> tuple[str, str]:
        out = self.manifest.out if out is None else out
        name = self.manifest.name if name is None else name
        os.makedirs(out, exist_ok=True)
        csv_path = os.path.join(out, f"{name}.csv")
        json_path = os.path.join(out, f"{name}.run.json")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "hist", "amalg", "scalar"])
            for row in zip(self.grid, self.hist, self.amalg.values, self.scalar.values):
                writer.writerow([_fmt(v) for v in row])
        with open(json_path, "w") as fh:
            json.dump(self.record, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else repr(float(v))


def draw_pair(manifest: DensityManifest) -> tuple[np.ndarray, np.ndarray]:
    X = manifest.X.generate(manifest.N, rng_for(manifest.seed, 0))
    Y = manifest.Y.generate(manifest.N, rng_for(manifest.seed, 1))
    return X, Y


def run_density(manifest: DensityManifest) -> DensityRun:
    """Histogram of ``(X + Y) / sqrt 2`` for one draw, with both predicted curves on the same draw.

    Raises :class:`NonConvergenceError` when more than ``max_nonconverged`` of
    the grid points fail for either solver.
    """
    X, Y = draw_pair(manifest)
    grid = make_grid(*manifest.grid)
    step = manifest.grid[2]
    s = math.sqrt(2.0)
    eigs_x = hermitian_eigenvalues(X)
    eigs_y = hermitian_eigenvalues(Y)
    eigs_sum = hermitian_eigenvalues((X + Y) / s)
    hist = window_histogram(eigs_sum, grid, step)
    amalg = amalgamated_density(
        X, Y, grid, manifest.solver, scale=s, chunks=manifest.chunks, workers=manifest.workers
    )
    scalar = scalar_free_density(eigs_x, eigs_y, grid, manifest.solver, scale=s)
    failed = {
        "amalg": [float(x) for x, ok in zip(grid, amalg.converged) if not ok],
        "scalar": [float(x) for x, ok in zip(grid, scalar.converged) if not ok],
    }
    for label, curve in (("amalg", amalg), ("scalar", scalar)):
        if curve.nonconverged_fraction > manifest.max_nonconverged:
            raise NonConvergenceError(
                f"{label} solver failed on {curve.nonconverged_fraction:.1%} of the grid",
                {"manifest": manifest.to_record(), "failed_points": failed},
            )
    record = {
        "version": __version__,
        "manifest": manifest.to_record(),
        "l1": {
            "hist_amalg": l1_distance(grid, hist, amalg.values, step),
            "hist_scalar": l1_distance(grid, hist, scalar.values, step),
        },
        "mass": {
            "hist": float(np.sum(hist) * step),
            "amalg": amalg.mass(),
            "scalar": scalar.mass(),
        },
        "iterations": {"amalg": amalg.iterations, "scalar": scalar.iterations},
        "failed_points": failed,
        "spectrum_range": [float(eigs_sum[0]), float(eigs_sum[-1])],
    }
    return DensityRun(manifest, grid, hist, amalg, scalar, record)


def with_seed(manifest: DensityManifest, seed: int) -> DensityManifest:
    return replace(manifest, seed=seed)
