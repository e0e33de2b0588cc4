"""Shared metrics and exports: NLL, density grids, quadrature check, AUROC."""

import math
from dataclasses import dataclass

import numpy as np

from ._util import atomic_write_text
from .data import Domain, as_points
from .errors import DomainError, ShapeError, ValidationError


@dataclass
class DensityGrid:
    """Log-density samples at cell centers of a regular grid over a box.

    `values` is flat with the first axis varying fastest; for 2-d that is
    one row of constant y after another, ready for contour plotting.
    """

    domain: Domain
    resolution: tuple[int, ...]
    values: np.ndarray

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for lo, hi, r in zip(self.domain.lows, self.domain.highs, self.resolution):
            vol *= (hi - lo) / r
        return vol


def _resolutions(domain: Domain, resolution) -> tuple[int, ...]:
    if np.ndim(resolution) == 0:
        res = (int(resolution),) * domain.dim
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != domain.dim:
        raise ValidationError(f"need {domain.dim} resolutions, got {len(res)}")
    if any(r < 2 for r in res):
        raise ValidationError(f"resolution must be >= 2 per axis, got {res}")
    return res


def grid_centers(domain: Domain, resolution) -> np.ndarray:
    """Cell-center coordinates, first axis fastest: low + (i + 0.5) * cell."""
    res = _resolutions(domain, resolution)
    axes = [lo + (np.arange(r) + 0.5) * ((hi - lo) / r)
            for lo, hi, r in zip(domain.lows, domain.highs, res)]
    mesh = np.meshgrid(*axes[::-1], indexing="ij")
    return np.column_stack([m.ravel() for m in mesh[::-1]])


def grid_eval(log_density_fn, domain: Domain, resolution) -> DensityGrid:
    """Evaluate a batch log-density function at every cell center."""
    res = _resolutions(domain, resolution)
    centers = grid_centers(domain, res)
    values = np.asarray(log_density_fn(centers), dtype=np.float64).ravel()
    if values.size != centers.shape[0]:
        raise ShapeError(
            f"log-density function returned {values.size} values for "
            f"{centers.shape[0]} cells")
    return DensityGrid(domain=domain, resolution=res, values=values)


def normalization_integral(grid: DensityGrid) -> float:
    """Midpoint Riemann sum of exp(log density) over the grid's box."""
    return float(np.exp(grid.values).sum() * grid.cell_volume)


def nll(log_density_fn, testset, domain: Domain | None = None) -> float:
    """Mean negative log density of the test rows under `log_density_fn`.

    With `domain` given, rows are containment-checked up front and a
    violation reports the offending row index.
    """
    pts = as_points(testset)
    if pts.shape[0] < 1:
        raise ValidationError("testset must be non-empty")
    if domain is not None:
        inside = domain.contains(pts)
        if not inside.all():
            bad = int(np.argmin(inside))
            raise DomainError(f"test row {bad} lies outside the evaluable domain")
    values = np.asarray(log_density_fn(pts), dtype=np.float64).ravel()
    if values.size != pts.shape[0]:
        raise ShapeError(
            f"log-density function returned {values.size} values for {pts.shape[0]} rows")
    return float(-values.mean())


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties half.

    Mann-Whitney form via average ranks, so tied scores get exactly half
    credit. Requires at least one positive and one negative label.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"scores and labels differ in length: {s.shape} vs {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be binary (0/1)")
    y = y.astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("need at least one positive and one negative label")

    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    new_group = np.r_[True, sorted_s[1:] != sorted_s[:-1]]
    group = np.cumsum(new_group) - 1
    counts = np.bincount(group)
    starts = np.r_[0, np.cumsum(counts)[:-1]]
    avg_rank = starts + (counts + 1) / 2.0  # 1-based average rank per tie group
    ranks = np.empty(s.size)
    ranks[order] = avg_rank[group]

    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def save_grid_csv(grid: DensityGrid, path) -> None:
    """2-d grid export: header x,y,log_density, one row per cell, row-major."""
    if grid.domain.dim != 2:
        raise ValidationError(
            f"grid CSV export supports 2-d grids only, got {grid.domain.dim}-d")
    centers = grid_centers(grid.domain, grid.resolution)
    lines = ["x,y,log_density"]
    for (x, y), v in zip(centers, grid.values):
        lines.append(f"{x:.17g},{y:.17g},{v:.17g}")
    atomic_write_text(path, "\n".join(lines) + "\n")
